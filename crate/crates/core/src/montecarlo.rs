//! Monte Carlo oracle for the closed-form SINR terms and combiner moments.
//!
//! Trials are split into fixed-size chunks processed in parallel; each chunk
//! is reduced sequentially and chunks are merged in index order, so results
//! are bitwise identical for any thread count. Trial `n` on attempt `j` uses
//! the RNG streams keyed by `(derive_seed(seed, j), n)`; a trial whose Gram
//! matrix is numerically singular at any AP is redrawn with the next attempt
//! and counted against the rejection budget.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combining::{CombinerSet, StrongBasis};
use crate::error::{Error, Result};
use crate::grouping::GroupingMatrix;
use crate::network::Network;
use crate::realization::{draw_with_noise, ChannelRealization};
use crate::rng::{complex_normal, derive_seed, stream_rng, Stream};
use crate::scenario::{LsfcMatrix, PilotPlan, PowerConfig, ScenarioConfig};
use crate::scheme::{Family, GroupingScheme};
use crate::sedecode::{SinrTerms, WeightMatrix};

const CHUNK: usize = 64;

/// Smallest trial count accepted by [`McConfig::validate`].
pub const MIN_TRIALS: usize = 100;

/// How the second moments are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimator {
    /// Sample moments of the combined true channels and of a drawn noise vector.
    Sample,
    /// Channel estimates are sampled; the estimation error and receiver noise,
    /// which are Gaussian and independent of everything the combiner sees, are
    /// averaged in closed form given the realization (Rao-Blackwellization).
    Conditional,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub num_trials: usize,
    pub seed: u64,
    pub rejection_budget: usize,
    /// Include standard errors in emitted reports.
    pub report_ci: bool,
    /// Receiver noise during the pilot phase.
    pub pilot_noise: bool,
    /// Receiver noise during data reception; off forces the GN term to zero.
    pub data_noise: bool,
    pub estimator: Estimator,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            num_trials: 2000,
            seed: 0,
            rejection_budget: 100,
            report_ci: false,
            pilot_noise: true,
            data_noise: true,
            estimator: Estimator::Conditional,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_trials < MIN_TRIALS {
            return Err(Error::config(
                "mc.trials",
                format!("at least {MIN_TRIALS} trials are required"),
            ));
        }
        Ok(())
    }
}

/// One grouping, combiner family and weight choice evaluated on shared realizations.
#[derive(Debug, Clone, Copy)]
pub struct McCase<'a> {
    pub grouping: &'a GroupingMatrix,
    pub family: Family,
    pub weights: &'a WeightMatrix,
}

/// Empirical terms of one UE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UeEstimate {
    pub ue: usize,
    pub terms: SinrTerms,
    pub stderr: SinrTerms,
    pub sinr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub trials: usize,
    pub rejected: usize,
    pub ues: Vec<UeEstimate>,
}

/// Running sums for one (case, UE) pair.
#[derive(Debug, Clone)]
struct UeAcc {
    /// Sum of `sum_m a v^H g_hat_mt`.
    z1: Complex64,
    z2: f64,
    /// Sum of `sum_m a v^H g_mt`.
    x1: Complex64,
    /// Sums of `|sum_m a v^H g_mk|^2` and its square, per `k`.
    s2: Vec<f64>,
    s4: Vec<f64>,
    n2: f64,
    n4: f64,
}

impl UeAcc {
    fn new(ues: usize) -> Self {
        Self {
            z1: Complex64::new(0.0, 0.0),
            z2: 0.0,
            x1: Complex64::new(0.0, 0.0),
            s2: vec![0.0; ues],
            s4: vec![0.0; ues],
            n2: 0.0,
            n4: 0.0,
        }
    }

    fn merge(&mut self, other: &Self) {
        self.z1 += other.z1;
        self.z2 += other.z2;
        self.x1 += other.x1;
        for (a, b) in self.s2.iter_mut().zip(&other.s2) {
            *a += b;
        }
        for (a, b) in self.s4.iter_mut().zip(&other.s4) {
            *a += b;
        }
        self.n2 += other.n2;
        self.n4 += other.n4;
    }
}

#[derive(Debug, Clone)]
struct Acc {
    cases: Vec<Vec<UeAcc>>,
    trials: usize,
    rejected: usize,
}

impl Acc {
    fn new(cases: usize, ues: usize) -> Self {
        Self {
            cases: vec![vec![UeAcc::new(ues); ues]; cases],
            trials: 0,
            rejected: 0,
        }
    }

    fn merge(&mut self, other: &Self) {
        for (a, b) in self.cases.iter_mut().zip(&other.cases) {
            for (x, y) in a.iter_mut().zip(b) {
                x.merge(y);
            }
        }
        self.trials += other.trials;
        self.rejected += other.rejected;
    }
}

/// Draws trial `n`, redrawing on degenerate Gram matrices.
fn draw_trial<T>(
    net: &Network,
    mc: &McConfig,
    n: usize,
    rejected: &mut usize,
    mut build: impl FnMut(&ChannelRealization) -> Result<T>,
) -> Result<(ChannelRealization, T, u64)> {
    let mut attempt = 0u64;
    loop {
        let key = derive_seed(mc.seed, attempt);
        let real = draw_with_noise(
            net,
            &mut stream_rng(key, Stream::Channel, n as u64),
            mc.pilot_noise,
        );
        match build(&real) {
            Ok(extra) => return Ok((real, extra, key)),
            Err(Error::SingularGram { ap, condition }) => {
                log::debug!(
                    "trial {n}: singular Gram at AP {ap} (condition {condition:e}), redrawing"
                );
                *rejected += 1;
                attempt += 1;
                if *rejected > mc.rejection_budget {
                    return Err(Error::RejectionBudgetExceeded {
                        rejected: *rejected,
                        budget: mc.rejection_budget,
                    });
                }
            }
            Err(e) => return Err(e),
        }
    }
}

struct ApProducts {
    /// `V^H G`, pilots by UEs.
    true_channel: DMatrix<Complex64>,
    /// `V^H G_hat`, pilots by UEs.
    estimate: DMatrix<Complex64>,
    noise: DVector<Complex64>,
    /// `||v_i||^2` per pilot.
    norm_sqr: Vec<f64>,
}

fn run_chunk(
    net: &Network,
    cases: &[McCase],
    mc: &McConfig,
    range: std::ops::Range<usize>,
) -> Result<Acc> {
    let tt = net.num_ues();
    let mm = net.num_aps();
    let a_count = net.antennas();
    let mut acc = Acc::new(cases.len(), tt);
    for n in range {
        let (real, sets, key) = draw_trial(net, mc, n, &mut acc.rejected, |real| {
            cases
                .iter()
                .map(|c| CombinerSet::build(real, &net.stats.theta, c.grouping, c.family))
                .collect::<Result<Vec<_>>>()
        })?;
        let noise: Vec<DVector<Complex64>> = if mc.data_noise && mc.estimator == Estimator::Sample {
            let mut rng = stream_rng(key, Stream::Noise, n as u64);
            (0..mm)
                .map(|_| DVector::from_fn(a_count, |_, _| complex_normal(&mut rng)))
                .collect()
        } else {
            vec![DVector::zeros(a_count); mm]
        };
        for ((case, set), case_acc) in cases.iter().zip(&sets).zip(acc.cases.iter_mut()) {
            // inner products of every pilot's combiner with every channel, per AP
            let per_ap: Vec<ApProducts> = (0..mm)
                .map(|m| {
                    let v = DMatrix::from_columns(&set.aps[m].vectors);
                    let vh = v.adjoint();
                    ApProducts {
                        true_channel: &vh * &real.g[m],
                        estimate: &vh * &real.ghat[m],
                        noise: &vh * &noise[m],
                        norm_sqr: set.aps[m]
                            .vectors
                            .iter()
                            .map(|v| v.norm_squared())
                            .collect(),
                    }
                })
                .collect();
            for (t, ue_acc) in case_acc.iter_mut().enumerate() {
                let i = net.plan.pilot(t);
                let a = case.weights.a.column(t);
                let mut z = Complex64::new(0.0, 0.0);
                let mut w = Complex64::new(0.0, 0.0);
                let mut gn = 0.0;
                let mut x = vec![Complex64::new(0.0, 0.0); tt];
                let mut err = vec![0.0; tt];
                for (m, ap) in per_ap.iter().enumerate() {
                    let am = a[m];
                    if am == 0.0 {
                        continue;
                    }
                    z += ap.estimate[(i, t)] * am;
                    match mc.estimator {
                        Estimator::Sample => {
                            w += ap.noise[i] * am;
                            for (k, xk) in x.iter_mut().enumerate() {
                                *xk += ap.true_channel[(i, k)] * am;
                            }
                        }
                        Estimator::Conditional => {
                            let scale = am * am * ap.norm_sqr[i];
                            if mc.data_noise {
                                gn += scale;
                            }
                            for (k, xk) in x.iter_mut().enumerate() {
                                *xk += ap.estimate[(i, k)] * am;
                                err[k] += scale * (net.beta(m, k) - net.gamma(m, k));
                            }
                        }
                    }
                }
                ue_acc.z1 += z;
                ue_acc.z2 += z.norm_sqr();
                ue_acc.x1 += x[t];
                for (k, xk) in x.iter().enumerate() {
                    let s = xk.norm_sqr() + err[k];
                    ue_acc.s2[k] += s;
                    ue_acc.s4[k] += s * s;
                }
                let s = match mc.estimator {
                    Estimator::Sample => w.norm_sqr(),
                    Estimator::Conditional => gn,
                };
                ue_acc.n2 += s;
                ue_acc.n4 += s * s;
            }
        }
        acc.trials += 1;
    }
    Ok(acc)
}

fn finalize(net: &Network, acc: &[UeAcc], trials: usize) -> Vec<UeEstimate> {
    let nf = trials as f64;
    let p = &net.powers.data;
    let moment_se = |s2: f64, s4: f64| ((s4 / nf - (s2 / nf).powi(2)).max(0.0) / nf).sqrt();
    acc.iter()
        .enumerate()
        .map(|(t, a)| {
            let it = net.plan.pilot(t);
            let zbar = a.z1 / nf;
            let var_z = ((a.z2 - nf * zbar.norm_sqr()) / (nf - 1.0)).max(0.0);
            let xbar = a.x1 / nf;
            let mut terms = SinrTerms {
                ds: p[t] * zbar.norm_sqr(),
                bu: p[t] * (a.s2[t] - nf * xbar.norm_sqr()) / (nf - 1.0),
                gn: a.n2 / nf,
                ..SinrTerms::default()
            };
            let mut stderr = SinrTerms {
                ds: 2.0 * p[t] * zbar.norm() * (var_z / nf).sqrt(),
                bu: p[t] * moment_se(a.s2[t], a.s4[t]),
                gn: moment_se(a.n2, a.n4),
                ..SinrTerms::default()
            };
            let (mut pc_var, mut ui_var) = (0.0, 0.0);
            for k in 0..net.num_ues() {
                if k == t {
                    continue;
                }
                let v = p[k] * a.s2[k] / nf;
                let se = p[k] * moment_se(a.s2[k], a.s4[k]);
                if net.plan.pilot(k) == it {
                    terms.pc += v;
                    pc_var += se * se;
                } else {
                    terms.ui += v;
                    ui_var += se * se;
                }
            }
            stderr.pc = pc_var.sqrt();
            stderr.ui = ui_var.sqrt();
            UeEstimate {
                ue: t,
                sinr: terms.sinr(),
                terms,
                stderr,
            }
        })
        .collect()
}

fn accumulate(net: &Network, cases: &[McCase], mc: &McConfig) -> Result<Acc> {
    mc.validate()?;
    let chunks: Vec<std::ops::Range<usize>> = (0..mc.num_trials)
        .step_by(CHUNK)
        .map(|s| s..(s + CHUNK).min(mc.num_trials))
        .collect();
    let parts: Vec<Result<Acc>> = chunks
        .into_par_iter()
        .map(|r| run_chunk(net, cases, mc, r))
        .collect();
    let mut total = Acc::new(cases.len(), net.num_ues());
    for part in parts {
        total.merge(&part?);
        if total.rejected > mc.rejection_budget {
            return Err(Error::RejectionBudgetExceeded {
                rejected: total.rejected,
                budget: mc.rejection_budget,
            });
        }
    }
    Ok(total)
}

/// Empirical DS/BU/PC/UI/GN of every UE for several cases on common realizations.
pub fn empirical_terms_multi(
    net: &Network,
    cases: &[McCase],
    mc: &McConfig,
) -> Result<Vec<McReport>> {
    let acc = accumulate(net, cases, mc)?;
    Ok(acc
        .cases
        .iter()
        .map(|c| McReport {
            trials: acc.trials,
            rejected: acc.rejected,
            ues: finalize(net, c, acc.trials),
        })
        .collect())
}

/// Empirical DS/BU/PC/UI/GN of every UE.
pub fn empirical_terms(net: &Network, case: McCase, mc: &McConfig) -> Result<McReport> {
    Ok(empirical_terms_multi(net, &[case], mc)?.remove(0))
}

/// Named combiner moment checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MomentCheck {
    /// Diagonal of the inverse Gram matrix against `1 / ((A - L_S) theta)`.
    WishartDiagonal,
    /// LZF response to its own pilot: `sqrt((A - L_S) gamma)` per realization.
    LzfSamePilot,
    /// LZF response to another strong pilot: exactly zero.
    LzfOtherStrong,
    /// LZF second moment toward a weak-pilot UE: `gamma`.
    LzfWeak,
    /// MR mean toward its own pilot: `sqrt(A gamma)`.
    MrMean,
    /// MR second moment toward a co-pilot UE: `(A + 1) gamma`.
    MrSamePilot,
    /// MR second moment toward another pilot: `gamma`.
    MrOtherPilot,
    /// Projected MR mean toward its own pilot: `sqrt((A - L_S) gamma)`.
    PmrMean,
    /// Projected MR second moment toward a co-pilot UE: `(A - L_S + 1) gamma`.
    PmrSamePilot,
    /// Projected MR response to a strong pilot: exactly zero.
    PmrStrong,
    /// Projected MR second moment toward another weak pilot: `gamma`.
    PmrWeak,
}

impl MomentCheck {
    pub const ALL: [MomentCheck; 11] = [
        MomentCheck::WishartDiagonal,
        MomentCheck::LzfSamePilot,
        MomentCheck::LzfOtherStrong,
        MomentCheck::LzfWeak,
        MomentCheck::MrMean,
        MomentCheck::MrSamePilot,
        MomentCheck::MrOtherPilot,
        MomentCheck::PmrMean,
        MomentCheck::PmrSamePilot,
        MomentCheck::PmrStrong,
        MomentCheck::PmrWeak,
    ];

    pub fn id(self) -> &'static str {
        match self {
            MomentCheck::WishartDiagonal => "wishart-diagonal",
            MomentCheck::LzfSamePilot => "lzf-same-pilot",
            MomentCheck::LzfOtherStrong => "lzf-other-strong",
            MomentCheck::LzfWeak => "lzf-weak",
            MomentCheck::MrMean => "mr-mean",
            MomentCheck::MrSamePilot => "mr-same-pilot",
            MomentCheck::MrOtherPilot => "mr-other-pilot",
            MomentCheck::PmrMean => "pmr-mean",
            MomentCheck::PmrSamePilot => "pmr-same-pilot",
            MomentCheck::PmrStrong => "pmr-strong",
            MomentCheck::PmrWeak => "pmr-weak",
        }
    }

    /// Deterministic per-realization identities rather than expectations.
    pub fn is_exact(self) -> bool {
        matches!(
            self,
            MomentCheck::LzfSamePilot | MomentCheck::LzfOtherStrong | MomentCheck::PmrStrong
        )
    }

    /// Relative tolerance used by the validation catalog.
    pub fn tolerance(self) -> f64 {
        match self {
            MomentCheck::MrMean | MomentCheck::PmrMean => 0.02,
            c if c.is_exact() => 1e-9,
            _ => 0.03,
        }
    }

    /// Smallest strong-set size the check needs.
    fn min_strong(self) -> usize {
        match self {
            MomentCheck::WishartDiagonal
            | MomentCheck::LzfSamePilot
            | MomentCheck::LzfWeak
            | MomentCheck::PmrStrong => 1,
            MomentCheck::LzfOtherStrong => 2,
            _ => 0,
        }
    }
}

impl fmt::Display for MomentCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for MomentCheck {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MomentCheck::ALL
            .into_iter()
            .find(|c| c.id() == s.trim())
            .ok_or_else(|| Error::UnknownCheck(s.to_string()))
    }
}

/// Single-AP network used by the moment catalog.
///
/// Pilots `0..L_S` are strong and pilots `L_S`, `L_S + 1` weak. UE `t < L_p`
/// sits on pilot `t`; two extra UEs share pilot 0 and pilot `L_S`.
#[derive(Debug, Clone)]
pub struct MomentBundle {
    pub net: Network,
    pub strong_count: usize,
    pub grouping: GroupingMatrix,
}

impl MomentBundle {
    pub fn new(antennas: usize, strong_count: usize) -> Result<Self> {
        if strong_count + 1 > antennas {
            return Err(Error::InfeasibleGrouping(format!(
                "{strong_count} strong pilots need more than {antennas} antennas"
            )));
        }
        let lp = strong_count + 2;
        let mut pilots: Vec<usize> = (0..lp).collect();
        pilots.push(0);
        pilots.push(strong_count);
        let tt = pilots.len();
        let cfg = ScenarioConfig {
            num_aps: 1,
            antennas_per_ap: antennas,
            num_ues: tt,
            num_pilots: lp,
            ..ScenarioConfig::desk()
        };
        let beta: Vec<f64> = (0..tt).map(|t| 0.4 + 0.15 * ((t * 7) % 5) as f64).collect();
        let lsfc = LsfcMatrix(DMatrix::from_row_slice(1, tt, &beta));
        let plan = PilotPlan::from_assignment(pilots, lp)?;
        let powers = PowerConfig {
            pilot: vec![2.0 / lp as f64; tt],
            data: vec![1.0; tt],
        };
        let net = Network::from_parts(&cfg, lsfc, plan, powers)?;
        let grouping =
            GroupingMatrix::from_sets(&[(0..strong_count).collect()], lp, GroupingScheme::GPfzf);
        Ok(Self {
            net,
            strong_count,
            grouping,
        })
    }

    /// Extra UE sharing pilot 0.
    fn strong_sharer(&self) -> usize {
        self.net.num_pilots()
    }

    /// Extra UE sharing the first weak pilot.
    fn weak_sharer(&self) -> usize {
        self.net.num_pilots() + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub check: MomentCheck,
    pub antennas: usize,
    pub strong_count: usize,
    /// Sample mean, or the worst relative deviation for exact checks.
    pub estimate: f64,
    pub stderr: f64,
    pub target: f64,
    /// `|estimate - target| / |target|`, or the worst deviation for exact checks.
    pub rel_error: f64,
    pub tolerance: f64,
    /// False when the strong set is too small for the check to exist.
    pub applicable: bool,
    pub pass: bool,
}

/// Monte Carlo estimate of one catalog entry.
pub fn empirical_moment(
    check: MomentCheck,
    bundle: &MomentBundle,
    mc: &McConfig,
) -> Result<MomentEstimate> {
    mc.validate()?;
    let ls = bundle.strong_count;
    let a = bundle.net.antennas();
    let af = a as f64;
    let free = (a - ls) as f64;
    let tol = check.tolerance();
    let mut out = MomentEstimate {
        check,
        antennas: a,
        strong_count: ls,
        estimate: f64::NAN,
        stderr: f64::NAN,
        target: f64::NAN,
        rel_error: f64::NAN,
        tolerance: tol,
        applicable: ls >= check.min_strong(),
        pass: true,
    };
    if !out.applicable {
        return Ok(out);
    }
    let net = &bundle.net;
    let stats = &net.stats;
    let gamma = |t: usize| stats.gamma[(0, t)];
    let weak = ls;
    let (pilot, ue, target) = match check {
        MomentCheck::WishartDiagonal => (0, 0, 1.0 / (free * stats.theta[(0, 0)])),
        MomentCheck::LzfSamePilot => (0, bundle.strong_sharer(), 0.0),
        MomentCheck::LzfOtherStrong => (0, 1, 0.0),
        MomentCheck::LzfWeak => (0, weak, gamma(weak)),
        MomentCheck::MrMean => (weak, weak, (af * gamma(weak)).sqrt()),
        MomentCheck::MrSamePilot => (
            weak,
            bundle.weak_sharer(),
            (af + 1.0) * gamma(bundle.weak_sharer()),
        ),
        MomentCheck::MrOtherPilot => (weak, weak + 1, gamma(weak + 1)),
        MomentCheck::PmrMean => (weak, weak, (free * gamma(weak)).sqrt()),
        MomentCheck::PmrSamePilot => (
            weak,
            bundle.weak_sharer(),
            (free + 1.0) * gamma(bundle.weak_sharer()),
        ),
        MomentCheck::PmrStrong => (weak, 0, 0.0),
        MomentCheck::PmrWeak => (weak, weak + 1, gamma(weak + 1)),
    };
    let family = match check {
        MomentCheck::PmrMean
        | MomentCheck::PmrSamePilot
        | MomentCheck::PmrStrong
        | MomentCheck::PmrWeak => Family::Pwpfzf,
        _ => Family::Pfzf,
    };
    let grouping = &bundle.grouping;
    let chunks: Vec<std::ops::Range<usize>> = (0..mc.num_trials)
        .step_by(CHUNK)
        .map(|s| s..(s + CHUNK).min(mc.num_trials))
        .collect();
    let sample = |real: &ChannelRealization, set: &CombinerSet| -> Result<f64> {
        let v = set.vector(0, pilot);
        let gh = real.ghat[0].column(ue);
        Ok(match check {
            MomentCheck::WishartDiagonal => {
                let basis = StrongBasis::new(&real.gbar[0], &grouping.strong_set(0), 0)?;
                basis.gram_inv[(0, 0)].re
            }
            MomentCheck::LzfSamePilot => {
                let expected = (free * gamma(ue)).sqrt();
                (v.dotc(&gh) - Complex64::from(expected)).norm() / expected
            }
            MomentCheck::LzfOtherStrong | MomentCheck::PmrStrong => {
                v.dotc(&gh).norm() / (v.norm() * gh.norm())
            }
            MomentCheck::MrMean | MomentCheck::PmrMean => v.dotc(&gh).re,
            _ => v.dotc(&gh).norm_sqr(),
        })
    };
    let parts: Vec<Result<(f64, f64, f64, usize)>> = chunks
        .into_par_iter()
        .map(|range| {
            let (mut s1, mut s2, mut worst, mut rejected) = (0.0, 0.0, 0.0f64, 0usize);
            for n in range {
                let (real, set, _) = draw_trial(net, mc, n, &mut rejected, |real| {
                    CombinerSet::build(real, &stats.theta, grouping, family)
                })?;
                let x = sample(&real, &set)?;
                s1 += x;
                s2 += x * x;
                worst = worst.max(x);
            }
            Ok((s1, s2, worst, rejected))
        })
        .collect();
    let (mut s1, mut s2, mut worst, mut rejected) = (0.0, 0.0, 0.0f64, 0usize);
    for part in parts {
        let (a1, a2, w, r) = part?;
        s1 += a1;
        s2 += a2;
        worst = worst.max(w);
        rejected += r;
    }
    if rejected > mc.rejection_budget {
        return Err(Error::RejectionBudgetExceeded {
            rejected,
            budget: mc.rejection_budget,
        });
    }
    let nf = mc.num_trials as f64;
    let mean = s1 / nf;
    let var = ((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0);
    if check.is_exact() {
        out.estimate = worst;
        out.stderr = 0.0;
        out.target = target;
        out.rel_error = worst;
    } else {
        out.estimate = mean;
        out.stderr = (var / nf).sqrt();
        out.target = target;
        out.rel_error = (mean - target).abs() / target.abs();
    }
    out.pass = out.rel_error <= tol;
    Ok(out)
}

/// Runs every catalog check for `A` antennas and every `L_S` in `0..A`.
pub fn moment_catalog(antennas: usize, mc: &McConfig) -> Result<Vec<MomentEstimate>> {
    let mut out = Vec::new();
    for ls in 0..antennas {
        let bundle = MomentBundle::new(antennas, ls)?;
        for check in MomentCheck::ALL {
            out.push(empirical_moment(check, &bundle, mc)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_ids_round_trip() {
        for c in MomentCheck::ALL {
            assert_eq!(c.id().parse::<MomentCheck>().unwrap(), c);
        }
        assert!(matches!(
            "nope".parse::<MomentCheck>(),
            Err(Error::UnknownCheck(_))
        ));
    }

    #[test]
    fn too_few_trials_rejected() {
        let mc = McConfig {
            num_trials: 10,
            ..McConfig::default()
        };
        let b = MomentBundle::new(4, 1).unwrap();
        assert!(empirical_moment(MomentCheck::MrMean, &b, &mc).is_err());
    }

    #[test]
    fn inapplicable_checks_are_skipped() {
        let b = MomentBundle::new(4, 0).unwrap();
        let mc = McConfig {
            num_trials: 100,
            ..McConfig::default()
        };
        let r = empirical_moment(MomentCheck::WishartDiagonal, &b, &mc).unwrap();
        assert!(!r.applicable && r.pass);
    }
}
