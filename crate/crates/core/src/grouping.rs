//! Strong/weak pilot selection per AP.
//!
//! Two rules are provided: a fixed LSFC-quantile threshold and a penalized
//! projected gradient ascent (PGA) on the relaxed sum of local SEs. Every
//! per-AP routine reads a single [`ApView`], i.e. one row of the statistics,
//! so APs can be grouped independently and in parallel.

use std::f64::consts::LN_2;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Network;
use crate::scenario::PilotPlan;
use crate::scheme::{Family, GroupingScheme};

/// Relative slack applied when comparing a captured LSFC fraction with the quantile.
const QUANTILE_SLACK: f64 = 1e-12;

/// Per-(AP, pilot) strong indicators.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupingMatrix {
    /// `M x L_p`, binary once finalized.
    pub delta: DMatrix<f64>,
    /// `L_S` of every AP.
    pub strong_count: Vec<usize>,
    pub scheme: GroupingScheme,
}

impl GroupingMatrix {
    /// Builds a binary matrix from per-AP strong sets.
    pub fn from_sets(sets: &[Vec<usize>], num_pilots: usize, scheme: GroupingScheme) -> Self {
        let mut delta = DMatrix::zeros(sets.len(), num_pilots);
        for (m, set) in sets.iter().enumerate() {
            for &i in set {
                delta[(m, i)] = 1.0;
            }
        }
        Self::from_delta(delta, scheme)
    }

    /// Wraps a binary indicator matrix.
    pub fn from_delta(delta: DMatrix<f64>, scheme: GroupingScheme) -> Self {
        let strong_count = delta
            .row_iter()
            .map(|r| r.iter().filter(|&&d| d > 0.5).count())
            .collect();
        Self {
            delta,
            strong_count,
            scheme,
        }
    }

    pub fn num_aps(&self) -> usize {
        self.delta.nrows()
    }

    pub fn num_pilots(&self) -> usize {
        self.delta.ncols()
    }

    pub fn is_strong(&self, m: usize, pilot: usize) -> bool {
        self.delta[(m, pilot)] > 0.5
    }

    /// Strong pilots of AP `m` in increasing pilot order.
    pub fn strong_set(&self, m: usize) -> Vec<usize> {
        (0..self.num_pilots())
            .filter(|&i| self.is_strong(m, i))
            .collect()
    }

    pub fn row(&self, m: usize) -> Vec<f64> {
        self.delta.row(m).iter().copied().collect()
    }

    /// Checks binarity and the `L_S <= A - 1` degrees-of-freedom limit.
    pub fn check_feasible(&self, antennas: usize) -> Result<()> {
        for m in 0..self.num_aps() {
            if self.delta.row(m).iter().any(|&d| d != 0.0 && d != 1.0) {
                return Err(Error::InfeasibleGrouping(format!(
                    "AP {m} has a non-binary indicator"
                )));
            }
            if self.strong_count[m] + 1 > antennas {
                return Err(Error::InfeasibleGrouping(format!(
                    "AP {m} has {} strong pilots with {antennas} antennas",
                    self.strong_count[m]
                )));
            }
        }
        Ok(())
    }
}

/// Parameters of the penalized projected gradient ascent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PgaConfig {
    pub step_size: f64,
    pub chi_init: f64,
    pub delta_growth: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Relative objective change that ends an inner loop.
    pub inner_tol: f64,
    /// Relative change of inner-converged objectives that ends the outer loop.
    pub outer_tol: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    pub delta_init: f64,
}

impl Default for PgaConfig {
    fn default() -> Self {
        Self {
            step_size: 0.1,
            chi_init: 0.1,
            delta_growth: 10.0,
            lambda1: 1.0,
            lambda2: 1.0,
            inner_tol: 1e-6,
            outer_tol: 5e-3,
            max_inner: 5000,
            max_outer: 12,
            delta_init: 0.5,
        }
    }
}

impl PgaConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("pga.alpha", self.step_size),
            ("pga.chi_init", self.chi_init),
            ("pga.lambda1", self.lambda1),
            ("pga.lambda2", self.lambda2),
            ("pga.inner_tol", self.inner_tol),
            ("pga.outer_tol", self.outer_tol),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, "must be positive and finite"));
            }
        }
        if !(self.delta_growth > 1.0 && self.delta_growth.is_finite()) {
            return Err(Error::config("pga.delta_growth", "must exceed 1"));
        }
        if !(self.delta_init > 0.0 && self.delta_init < 1.0) {
            return Err(Error::config("pga.delta_init", "must lie in (0, 1)"));
        }
        if self.max_inner == 0 || self.max_outer == 0 {
            return Err(Error::config(
                "pga.max_inner",
                "iteration budgets must be positive",
            ));
        }
        Ok(())
    }
}

/// Everything one AP knows: its own row of the statistics plus pilot plan and powers.
#[derive(Debug, Clone)]
pub struct ApView<'a> {
    pub antennas: usize,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub power: &'a [f64],
    pub plan: &'a PilotPlan,
    /// `sum_{k in P_i} p_k gamma_k`.
    pilot_gamma: Vec<f64>,
    /// `sum_k p_k beta_k + 1`.
    total_rx: f64,
}

impl<'a> ApView<'a> {
    pub fn new(net: &'a Network, m: usize) -> Self {
        Self::from_rows(
            net.antennas(),
            net.lsfc.0.row(m).iter().copied().collect(),
            net.stats.gamma.row(m).iter().copied().collect(),
            &net.powers.data,
            &net.plan,
        )
    }

    pub fn from_rows(
        antennas: usize,
        beta: Vec<f64>,
        gamma: Vec<f64>,
        power: &'a [f64],
        plan: &'a PilotPlan,
    ) -> Self {
        let mut pilot_gamma = vec![0.0; plan.num_pilots()];
        for (t, &g) in gamma.iter().enumerate() {
            pilot_gamma[plan.pilot(t)] += power[t] * g;
        }
        let total_rx = beta.iter().zip(power).map(|(b, p)| p * b).sum::<f64>() + 1.0;
        Self {
            antennas,
            beta,
            gamma,
            power,
            plan,
            pilot_gamma,
            total_rx,
        }
    }

    pub fn num_ues(&self) -> usize {
        self.beta.len()
    }

    pub fn num_pilots(&self) -> usize {
        self.plan.num_pilots()
    }

    /// `sum_{k in P_{i_t} \ t} p_k gamma_k`.
    fn copilot_gamma(&self, t: usize) -> f64 {
        self.pilot_gamma[self.plan.pilot(t)] - self.power[t] * self.gamma[t]
    }
}

/// Signal and interference-plus-noise of the relaxed local SINR.
#[derive(Debug, Clone, Copy)]
struct Relaxed {
    s: f64,
    i: f64,
    /// Array gain before clamping at zero.
    raw_gain: f64,
}

fn relaxed(view: &ApView, delta: &[f64], t: usize, family: Family) -> Relaxed {
    let a = view.antennas as f64;
    let it = view.plan.pilot(t);
    let q = view.copilot_gamma(t);
    let (raw_gain, nulled) = match family {
        Family::Pfzf => {
            let others: f64 = (0..delta.len())
                .filter(|&i| i != it)
                .map(|i| delta[i])
                .sum();
            let cross: f64 = (0..delta.len())
                .filter(|&i| i != it)
                .map(|i| delta[i] * view.pilot_gamma[i])
                .sum();
            (
                a - delta[it] * (1.0 + others),
                delta[it] * (view.pilot_gamma[it] + cross),
            )
        }
        Family::Pwpfzf => {
            let sum: f64 = delta.iter().sum();
            let nulled: f64 = delta
                .iter()
                .zip(&view.pilot_gamma)
                .map(|(d, g)| d * g)
                .sum();
            (a - sum, nulled)
        }
    };
    let n = raw_gain.max(0.0);
    let s = view.power[t] * n * view.gamma[t];
    let i = n * q + view.total_rx - nulled;
    Relaxed { s, i, raw_gain }
}

/// Relaxed local SINR of UE `t`; equals the closed-form local SINR at binary `delta`.
///
/// The array gain is clamped at zero, which only matters outside the
/// feasible region (more strong pilots than antennas).
pub fn local_sinr(view: &ApView, delta: &[f64], t: usize, family: Family) -> f64 {
    let r = relaxed(view, delta, t, family);
    r.s / r.i
}

/// Penalty `lambda1 sum max(0, d - d^2)^2 + lambda2 max(0, sum d - A + 1)^2` without `chi`.
pub fn penalty(delta: &[f64], antennas: usize, lambda1: f64, lambda2: f64) -> f64 {
    let box_term: f64 = delta.iter().map(|&d| (d - d * d).max(0.0).powi(2)).sum();
    let excess = (delta.iter().sum::<f64>() - antennas as f64 + 1.0).max(0.0);
    lambda1 * box_term + lambda2 * excess * excess
}

/// Sum over all UEs of `log2(1 + local SINR)`.
pub fn local_sum_se(view: &ApView, delta: &[f64], family: Family) -> f64 {
    (0..view.num_ues())
        .map(|t| (1.0 + local_sinr(view, delta, t, family)).log2())
        .sum()
}

/// Penalized relaxed objective.
pub fn pga_objective(
    view: &ApView,
    delta: &[f64],
    family: Family,
    chi: f64,
    lambda1: f64,
    lambda2: f64,
) -> f64 {
    local_sum_se(view, delta, family) - chi * penalty(delta, view.antennas, lambda1, lambda2)
}

/// Analytic gradient of [`pga_objective`].
pub fn pga_gradient(
    view: &ApView,
    delta: &[f64],
    family: Family,
    chi: f64,
    lambda1: f64,
    lambda2: f64,
) -> Vec<f64> {
    let lp = delta.len();
    let mut grad = vec![0.0; lp];
    for t in 0..view.num_ues() {
        let r = relaxed(view, delta, t, family);
        let it = view.plan.pilot(t);
        let q = view.copilot_gamma(t);
        let active = r.raw_gain > 0.0;
        let pg = view.power[t] * view.gamma[t];
        let denom = LN_2 * r.i * (r.i + r.s);
        match family {
            Family::Pfzf => {
                let others: f64 = (0..lp).filter(|&i| i != it).map(|i| delta[i]).sum();
                let cross: f64 = (0..lp)
                    .filter(|&i| i != it)
                    .map(|i| delta[i] * view.pilot_gamma[i])
                    .sum();
                for (j, g) in grad.iter_mut().enumerate() {
                    let dn = if !active {
                        0.0
                    } else if j == it {
                        -(1.0 + others)
                    } else {
                        -delta[it]
                    };
                    let ds = pg * dn;
                    let di = if j == it {
                        dn * q - view.pilot_gamma[it] - cross
                    } else {
                        dn * q - delta[it] * view.pilot_gamma[j]
                    };
                    *g += (r.i * ds - r.s * di) / denom;
                }
            }
            Family::Pwpfzf => {
                let dn = if active { -1.0 } else { 0.0 };
                for (j, g) in grad.iter_mut().enumerate() {
                    let ds = pg * dn;
                    let di = dn * q - view.pilot_gamma[j];
                    *g += (r.i * ds - r.s * di) / denom;
                }
            }
        }
    }
    let excess = (delta.iter().sum::<f64>() - view.antennas as f64 + 1.0).max(0.0);
    for (g, &d) in grad.iter_mut().zip(delta) {
        let box_arg = (d - d * d).max(0.0);
        *g -= chi * (2.0 * lambda1 * box_arg * (1.0 - 2.0 * d) + 2.0 * lambda2 * excess);
    }
    grad
}

/// Normwise relative gap `||g - g_fd|| / ||g_fd||` between [`pga_gradient`]
/// and central differences of [`pga_objective`] with step `h`.
pub fn gradient_fd_error(
    view: &ApView,
    delta: &[f64],
    family: Family,
    chi: f64,
    lambda1: f64,
    lambda2: f64,
    h: f64,
) -> f64 {
    let analytic = pga_gradient(view, delta, family, chi, lambda1, lambda2);
    let mut probe = delta.to_vec();
    let (mut diff, mut norm) = (0.0, 0.0);
    for (j, g) in analytic.iter().enumerate() {
        probe[j] = delta[j] + h;
        let up = pga_objective(view, &probe, family, chi, lambda1, lambda2);
        probe[j] = delta[j] - h;
        let down = pga_objective(view, &probe, family, chi, lambda1, lambda2);
        probe[j] = delta[j];
        let fd = (up - down) / (2.0 * h);
        diff += (g - fd).powi(2);
        norm += fd * fd;
    }
    (diff / norm.max(f64::MIN_POSITIVE)).sqrt()
}

/// Result of one per-AP PGA run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgaOutcome {
    /// Final binary, feasible indicators.
    pub delta: Vec<f64>,
    /// Last relaxed iterate before rounding.
    pub relaxed: Vec<f64>,
    /// Penalized objective after every inner step.
    pub trace: Vec<f64>,
    /// Constraint violation `sum (d - d^2) + max(0, sum d - A + 1)` after each outer iteration.
    pub violation: Vec<f64>,
    /// Local sum SE at the final binary indicators.
    pub objective: f64,
    pub converged: bool,
}

fn relative_change(new: f64, old: f64) -> f64 {
    (new - old).abs() / old.abs().max(f64::MIN_POSITIVE)
}

fn violation(delta: &[f64], antennas: usize) -> f64 {
    let box_term: f64 = delta.iter().map(|&d| d - d * d).sum();
    box_term + (delta.iter().sum::<f64>() - antennas as f64 + 1.0).max(0.0)
}

/// Rounds at 0.5 (exact ties round down) and demotes the weakest strong
/// pilots until `L_S <= A - 1`.
pub fn round_and_repair(relaxed: &[f64], antennas: usize) -> Vec<f64> {
    let mut strong: Vec<usize> = (0..relaxed.len()).filter(|&i| relaxed[i] > 0.5).collect();
    let limit = antennas.saturating_sub(1);
    if strong.len() > limit {
        strong.sort_by(|&a, &b| relaxed[b].total_cmp(&relaxed[a]).then(a.cmp(&b)));
        strong.truncate(limit);
    }
    let mut out = vec![0.0; relaxed.len()];
    for i in strong {
        out[i] = 1.0;
    }
    out
}

/// Penalized projected gradient ascent for one AP.
pub fn pga_optimize(view: &ApView, family: Family, cfg: &PgaConfig) -> PgaOutcome {
    let lp = view.num_pilots();
    let mut delta = vec![cfg.delta_init; lp];
    let mut chi = cfg.chi_init;
    let mut trace = Vec::new();
    let mut violations = Vec::new();
    let mut converged = false;
    let mut prev_outer: Option<f64> = None;
    let objective =
        |d: &[f64], chi: f64| pga_objective(view, d, family, chi, cfg.lambda1, cfg.lambda2);
    for _ in 0..cfg.max_outer {
        let mut f_prev = objective(&delta, chi);
        let mut inner_done = false;
        for _ in 0..cfg.max_inner {
            let grad = pga_gradient(view, &delta, family, chi, cfg.lambda1, cfg.lambda2);
            for (d, g) in delta.iter_mut().zip(&grad) {
                *d = (*d + cfg.step_size * g).clamp(0.0, 1.0);
            }
            let f = objective(&delta, chi);
            trace.push(f);
            let change = relative_change(f, f_prev);
            f_prev = f;
            if change <= cfg.inner_tol {
                inner_done = true;
                break;
            }
        }
        violations.push(violation(&delta, view.antennas));
        if inner_done {
            if let Some(p) = prev_outer {
                if relative_change(f_prev, p) <= cfg.outer_tol {
                    converged = true;
                    break;
                }
            }
        }
        prev_outer = Some(f_prev);
        chi *= cfg.delta_growth;
    }
    if !converged {
        log::debug!("PGA budget exhausted after {} steps", trace.len());
    }
    let binary = round_and_repair(&delta, view.antennas);
    let objective = local_sum_se(view, &binary, family);
    PgaOutcome {
        delta: binary,
        relaxed: delta,
        trace,
        violation: violations,
        objective,
        converged,
    }
}

/// Quantile-threshold strong set of one AP.
///
/// UEs are sorted by `beta` (descending, ties by index); the shortest prefix
/// capturing at least `quantile` of the AP's total LSFC marks its pilots
/// strong. The set is clipped to `A - 1` pilots, dropping those whose best
/// UE is weakest, and `force_one` promotes the top pilot if the set is empty.
pub fn threshold_strong_set(view: &ApView, quantile: f64, force_one: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..view.num_ues()).collect();
    order.sort_by(|&a, &b| view.beta[b].total_cmp(&view.beta[a]).then(a.cmp(&b)));
    let total: f64 = view.beta.iter().sum();
    let target = quantile * total - QUANTILE_SLACK * total;
    let mut strong: Vec<usize> = Vec::new();
    let mut acc = 0.0;
    for &t in &order {
        if acc >= target {
            break;
        }
        acc += view.beta[t];
        let i = view.plan.pilot(t);
        if !strong.contains(&i) {
            strong.push(i);
        }
    }
    strong.truncate(view.antennas.saturating_sub(1));
    if strong.is_empty() && force_one && view.antennas >= 2 {
        if let Some(&t) = order.first() {
            strong.push(view.plan.pilot(t));
        }
    }
    strong.sort_unstable();
    strong
}

/// Threshold grouping over the whole network.
pub fn threshold_grouping(net: &Network, quantile: f64, family: Family) -> Result<GroupingMatrix> {
    if !(quantile > 0.0 && quantile < 1.0) {
        return Err(Error::config("threshold.quantile", "must lie in (0, 1)"));
    }
    let scheme = match family {
        Family::Pfzf => GroupingScheme::ThresholdPfzf,
        Family::Pwpfzf => GroupingScheme::ThresholdPwpfzf,
    };
    let sets: Vec<Vec<usize>> = (0..net.num_aps())
        .map(|m| threshold_strong_set(&ApView::new(net, m), quantile, family == Family::Pfzf))
        .collect();
    Ok(GroupingMatrix::from_sets(&sets, net.num_pilots(), scheme))
}

/// Options shared by every grouping rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupingOptions {
    pub pga: PgaConfig,
    pub quantile: f64,
}

impl Default for GroupingOptions {
    fn default() -> Self {
        Self {
            pga: PgaConfig::default(),
            quantile: 0.9,
        }
    }
}

/// Groups every AP under `scheme`; PGA runs are independent and parallel across APs.
pub fn group_network(
    net: &Network,
    scheme: GroupingScheme,
    opts: &GroupingOptions,
) -> Result<GroupingMatrix> {
    let lp = net.num_pilots();
    let a = net.antennas();
    match scheme {
        GroupingScheme::GPfzf | GroupingScheme::GPwpfzf => {
            opts.pga.validate()?;
            let family = scheme.family();
            let rows: Vec<Vec<f64>> = (0..net.num_aps())
                .into_par_iter()
                .map(|m| pga_optimize(&ApView::new(net, m), family, &opts.pga).delta)
                .collect();
            let mut delta = DMatrix::zeros(net.num_aps(), lp);
            for (m, row) in rows.iter().enumerate() {
                for (i, &d) in row.iter().enumerate() {
                    delta[(m, i)] = d;
                }
            }
            Ok(GroupingMatrix::from_delta(delta, scheme))
        }
        GroupingScheme::ThresholdPfzf => threshold_grouping(net, opts.quantile, Family::Pfzf),
        GroupingScheme::ThresholdPwpfzf => threshold_grouping(net, opts.quantile, Family::Pwpfzf),
        GroupingScheme::AllMr => Ok(GroupingMatrix::from_sets(
            &vec![Vec::new(); net.num_aps()],
            lp,
            scheme,
        )),
        GroupingScheme::AllFzf => {
            // every pilot when the array allows it, otherwise the A - 1 strongest by theta
            let sets: Vec<Vec<usize>> = (0..net.num_aps())
                .map(|m| {
                    let mut pilots: Vec<usize> = (0..lp).collect();
                    pilots.sort_by(|&x, &y| {
                        net.stats.theta[(m, y)]
                            .total_cmp(&net.stats.theta[(m, x)])
                            .then(x.cmp(&y))
                    });
                    pilots.truncate(a - 1);
                    pilots.sort_unstable();
                    pilots
                })
                .collect();
            Ok(GroupingMatrix::from_sets(&sets, lp, scheme))
        }
    }
}

/// Best binary feasible indicators by enumeration of all `2^L_p` patterns.
pub fn exhaustive_optimum(view: &ApView, family: Family) -> (Vec<f64>, f64) {
    let lp = view.num_pilots();
    assert!(
        lp < 24,
        "exhaustive search over {lp} pilots is not tractable"
    );
    let mut best = (vec![0.0; lp], f64::NEG_INFINITY);
    for mask in 0u32..(1 << lp) {
        if mask.count_ones() as usize + 1 > view.antennas {
            continue;
        }
        let d: Vec<f64> = (0..lp).map(|i| f64::from((mask >> i) & 1)).collect();
        let v = local_sum_se(view, &d, family);
        if v > best.1 {
            best = (d, v);
        }
    }
    best
}
