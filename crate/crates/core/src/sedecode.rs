//! Closed-form global SINR/SE under the three decoding architectures.
//!
//! For UE `t` with combining at AP `m` the closed form needs, per UE `k`,
//! the coherent gain `b_k[m] = sqrt(n_mt gamma_mk)` (only for pilot sharers)
//! and the noncoherent power `nu_mk = beta_mk - (nulled part) gamma_mk`, where
//!
//! * G-PFZF: `n_mt = A - delta_{m i_t} L_S`, nulled part `delta_{m i_t} delta_{m i_k}`
//! * G-PWPFZF: `n_mt = A - L_S`, nulled part `delta_{m i_k}`.
//!
//! The global SINR is `DS / (BU + PC + UI + GN)` with
//! `DS = p_t (sum_m a_m b_t[m])^2`, `GN = sum_m a_m^2` and the remaining
//! terms assembled from the same ingredients.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grouping::GroupingMatrix;
use crate::network::Network;
use crate::scenario::ScenarioConfig;
use crate::scheme::{Architecture, Family};

/// Relative diagonal loading applied when an o-LSFD covariance is not positive definite.
const DIAGONAL_LOADING: f64 = 1e-12;

/// Decoding weights `a_mt`, `M x T`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    pub a: DMatrix<f64>,
}

impl WeightMatrix {
    /// Weights of UE `t` across all APs.
    pub fn column(&self, t: usize) -> Vec<f64> {
        self.a.column(t).iter().copied().collect()
    }
}

/// Signal and interference terms of one UE's SINR.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SinrTerms {
    pub ds: f64,
    pub bu: f64,
    pub pc: f64,
    pub ui: f64,
    pub gn: f64,
}

impl SinrTerms {
    pub fn sinr(&self) -> f64 {
        self.ds / (self.bu + self.pc + self.ui + self.gn)
    }
}

/// Per-UE SINR with its decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UeSinr {
    pub ue: usize,
    pub sinr: f64,
    pub se: f64,
    pub terms: SinrTerms,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinrReport {
    pub prelog: f64,
    pub ues: Vec<UeSinr>,
}

impl SinrReport {
    pub fn sum_se(&self) -> f64 {
        self.ues.iter().map(|u| u.se).sum()
    }

    pub fn sinr(&self) -> Vec<f64> {
        self.ues.iter().map(|u| u.sinr).collect()
    }

    pub fn se(&self) -> Vec<f64> {
        self.ues.iter().map(|u| u.se).collect()
    }
}

/// `L_u log2(1 + sinr)` with `L_u = (1 - L_p / L_c) / 2`.
pub fn se_from_sinr(sinr: f64, cfg: &ScenarioConfig) -> f64 {
    cfg.prelog() * (1.0 + sinr).log2()
}

/// Closed-form ingredients of one network under one grouping and family.
pub struct ClosedForm<'a> {
    net: &'a Network,
    grouping: &'a GroupingMatrix,
    family: Family,
}

impl<'a> ClosedForm<'a> {
    pub fn new(net: &'a Network, grouping: &'a GroupingMatrix, family: Family) -> Self {
        Self {
            net,
            grouping,
            family,
        }
    }

    /// Uses the family implied by the grouping scheme.
    pub fn for_grouping(net: &'a Network, grouping: &'a GroupingMatrix) -> Self {
        Self::new(net, grouping, grouping.scheme.family())
    }

    fn strong(&self, m: usize, ue: usize) -> bool {
        self.grouping.is_strong(m, self.net.plan.pilot(ue))
    }

    /// Array gain `n_mt` of the combiner used by UE `t` at AP `m`.
    pub fn array_gain(&self, m: usize, t: usize) -> f64 {
        let a = self.net.antennas() as f64;
        let ls = self.grouping.strong_count[m] as f64;
        match self.family {
            Family::Pfzf if self.strong(m, t) => a - ls,
            Family::Pfzf => a,
            Family::Pwpfzf => a - ls,
        }
    }

    /// Coherent gain of co-pilot UE `k` through UE `t`'s combiner.
    pub fn coherent(&self, m: usize, t: usize, k: usize) -> f64 {
        (self.array_gain(m, t) * self.net.gamma(m, k)).sqrt()
    }

    /// Noncoherent power of UE `k` through UE `t`'s combiner.
    pub fn noncoherent(&self, m: usize, t: usize, k: usize) -> f64 {
        let nulled = match self.family {
            Family::Pfzf => self.strong(m, t) && self.strong(m, k),
            Family::Pwpfzf => self.strong(m, k),
        };
        let beta = self.net.beta(m, k);
        if nulled {
            beta - self.net.gamma(m, k)
        } else {
            beta
        }
    }

    /// `sum_k p_k nu_mk + 1`: everything except coherent contamination.
    fn diagonal_load(&self, m: usize, t: usize) -> f64 {
        let p = &self.net.powers.data;
        (0..self.net.num_ues())
            .map(|k| p[k] * self.noncoherent(m, t, k))
            .sum::<f64>()
            + 1.0
    }

    /// Closed-form local SINR of UE `t` at AP `m`, the proposed local weight.
    pub fn local_sinr(&self, m: usize, t: usize) -> f64 {
        let p = &self.net.powers.data;
        let i = self.net.plan.pilot(t);
        let contamination: f64 = self
            .net
            .plan
            .sharers(i)
            .iter()
            .filter(|&&k| k != t)
            .map(|&k| p[k] * self.coherent(m, t, k).powi(2))
            .sum();
        p[t] * self.coherent(m, t, t).powi(2) / (contamination + self.diagonal_load(m, t))
    }

    /// Local-SINR weights for every AP and UE.
    pub fn local_weights(&self) -> WeightMatrix {
        let (mm, tt) = (self.net.num_aps(), self.net.num_ues());
        WeightMatrix {
            a: DMatrix::from_fn(mm, tt, |m, t| self.local_sinr(m, t)),
        }
    }

    /// SINR-optimal weights `C_t^{-1} b_t` for UE `t`.
    pub fn olsfd_weights(&self, t: usize) -> Result<Vec<f64>> {
        let mm = self.net.num_aps();
        let p = &self.net.powers.data;
        let i = self.net.plan.pilot(t);
        let b = |k: usize| DVector::from_fn(mm, |m, _| self.coherent(m, t, k));
        let mut c = DMatrix::from_diagonal(&DVector::from_fn(mm, |m, _| self.diagonal_load(m, t)));
        for &k in self.net.plan.sharers(i) {
            if k != t {
                let bk = b(k);
                c += &bk * bk.transpose() * p[k];
            }
        }
        let bt = b(t);
        let chol = match Cholesky::new(c.clone()) {
            Some(ch) => ch,
            None => {
                let load = DIAGONAL_LOADING * c.diagonal().max();
                log::warn!(
                    "o-LSFD covariance of UE {t} is not positive definite, loading by {load:e}"
                );
                for m in 0..mm {
                    c[(m, m)] += load;
                }
                Cholesky::new(c).ok_or(Error::SingularMatrix { ue: t })?
            }
        };
        Ok(chol.solve(&bt).iter().copied().collect())
    }

    pub fn olsfd_matrix(&self) -> Result<WeightMatrix> {
        let mut a = DMatrix::zeros(self.net.num_aps(), self.net.num_ues());
        for t in 0..self.net.num_ues() {
            a.set_column(t, &DVector::from_vec(self.olsfd_weights(t)?));
        }
        Ok(WeightMatrix { a })
    }

    pub fn weights(&self, arch: Architecture) -> Result<WeightMatrix> {
        match arch {
            Architecture::Local => Ok(self.local_weights()),
            Architecture::Olsfd => self.olsfd_matrix(),
            Architecture::Uniform => Ok(uniform_weights(self.net)),
        }
    }

    /// Term decomposition of UE `t` under decoding weights `a` (length `M`).
    pub fn terms(&self, a: &[f64], t: usize) -> SinrTerms {
        let p = &self.net.powers.data;
        let it = self.net.plan.pilot(t);
        let mm = self.net.num_aps();
        let coherent_sum = |k: usize| (0..mm).map(|m| a[m] * self.coherent(m, t, k)).sum::<f64>();
        let noncoherent_sum = |k: usize| {
            (0..mm)
                .map(|m| a[m] * a[m] * self.noncoherent(m, t, k))
                .sum::<f64>()
        };
        let mut terms = SinrTerms {
            ds: p[t] * coherent_sum(t).powi(2),
            bu: p[t] * noncoherent_sum(t),
            gn: a.iter().map(|x| x * x).sum(),
            ..SinrTerms::default()
        };
        for k in 0..self.net.num_ues() {
            if k == t {
                continue;
            }
            if self.net.plan.pilot(k) == it {
                terms.pc += p[k] * (coherent_sum(k).powi(2) + noncoherent_sum(k));
            } else {
                terms.ui += p[k] * noncoherent_sum(k);
            }
        }
        terms
    }

    pub fn ue_sinr(&self, weights: &WeightMatrix, t: usize) -> UeSinr {
        let terms = self.terms(&weights.column(t), t);
        let sinr = terms.sinr();
        UeSinr {
            ue: t,
            sinr,
            se: se_from_sinr(sinr, &self.net.cfg),
            terms,
        }
    }

    pub fn report(&self, weights: &WeightMatrix) -> SinrReport {
        SinrReport {
            prelog: self.net.cfg.prelog(),
            ues: (0..self.net.num_ues())
                .map(|t| self.ue_sinr(weights, t))
                .collect(),
        }
    }
}

/// Simple aggregation, `a_mt = 1`.
pub fn uniform_weights(net: &Network) -> WeightMatrix {
    WeightMatrix {
        a: DMatrix::from_element(net.num_aps(), net.num_ues(), 1.0),
    }
}

pub fn local_weights(net: &Network, grouping: &GroupingMatrix, family: Family) -> WeightMatrix {
    ClosedForm::new(net, grouping, family).local_weights()
}

pub fn olsfd_weights(
    net: &Network,
    grouping: &GroupingMatrix,
    family: Family,
    t: usize,
) -> Result<Vec<f64>> {
    ClosedForm::new(net, grouping, family).olsfd_weights(t)
}

pub fn closed_form_sinr(
    weights: &WeightMatrix,
    net: &Network,
    grouping: &GroupingMatrix,
    family: Family,
    t: usize,
) -> UeSinr {
    ClosedForm::new(net, grouping, family).ue_sinr(weights, t)
}

/// Closed-form report of every UE for one architecture.
pub fn evaluate(
    net: &Network,
    grouping: &GroupingMatrix,
    family: Family,
    arch: Architecture,
) -> Result<SinrReport> {
    let cf = ClosedForm::new(net, grouping, family);
    let w = cf.weights(arch)?;
    Ok(cf.report(&w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grouping::{local_sinr, ApView};
    use crate::scenario::{LsfcMatrix, PilotPlan, PowerConfig};
    use crate::scheme::GroupingScheme;

    fn single(beta: f64, a: usize, p: f64, pilot_snr: f64) -> Network {
        let cfg = ScenarioConfig {
            num_aps: 1,
            antennas_per_ap: a,
            num_ues: 1,
            num_pilots: 1,
            ..ScenarioConfig::table_i()
        };
        let lsfc = LsfcMatrix(DMatrix::from_element(1, 1, beta));
        let plan = PilotPlan::from_assignment(vec![0], 1).unwrap();
        let powers = PowerConfig {
            pilot: vec![pilot_snr],
            data: vec![p],
        };
        Network::from_parts(&cfg, lsfc, plan, powers).unwrap()
    }

    #[test]
    fn single_weak_ue() {
        // p L_p beta = 1 gives gamma = beta / 2 = 0.5
        let net = single(1.0, 4, 1.0, 1.0);
        assert!((net.gamma(0, 0) - 0.5).abs() < 1e-15);
        let g = GroupingMatrix::from_sets(&[vec![]], 1, GroupingScheme::GPfzf);
        let r = evaluate(&net, &g, Family::Pfzf, Architecture::Uniform).unwrap();
        assert!((r.ues[0].sinr - 1.0).abs() < 1e-14);
        assert!((r.ues[0].se - net.cfg.prelog()).abs() < 1e-14);
    }

    #[test]
    fn se_examples() {
        let cfg = ScenarioConfig {
            num_pilots: 7,
            coherence_len: 200,
            ..ScenarioConfig::table_i()
        };
        assert_eq!(se_from_sinr(0.0, &cfg), 0.0);
        assert!((se_from_sinr(1.0, &cfg) - 0.4825).abs() < 1e-15);
        let full = ScenarioConfig {
            num_pilots: 200,
            ..cfg
        };
        assert_eq!(se_from_sinr(123.0, &full), 0.0);
    }

    fn small_net() -> Network {
        let cfg = ScenarioConfig {
            num_aps: 3,
            antennas_per_ap: 4,
            num_ues: 4,
            num_pilots: 2,
            ..ScenarioConfig::table_i()
        };
        let lsfc = LsfcMatrix(DMatrix::from_row_slice(
            3,
            4,
            &[
                1.0, 0.2, 0.05, 0.4, 0.1, 2.0, 0.3, 0.02, 0.6, 0.05, 1.5, 0.3,
            ],
        ));
        let plan = PilotPlan::from_assignment(vec![0, 1, 0, 1], 2).unwrap();
        let powers = PowerConfig::uniform(4, 3.0);
        Network::from_parts(&cfg, lsfc, plan, powers).unwrap()
    }

    #[test]
    fn local_weights_match_relaxed_local_sinr_at_binary_points() {
        let net = small_net();
        for family in [Family::Pfzf, Family::Pwpfzf] {
            for sets in [
                vec![vec![], vec![1], vec![0, 1]],
                vec![vec![0], vec![0], vec![1]],
            ] {
                let g = GroupingMatrix::from_sets(&sets, 2, GroupingScheme::GPfzf);
                let w = local_weights(&net, &g, family);
                for m in 0..3 {
                    let view = ApView::new(&net, m);
                    for t in 0..4 {
                        let relaxed = local_sinr(&view, &g.row(m), t, family);
                        assert!((relaxed - w.a[(m, t)]).abs() <= 1e-12 * relaxed.abs());
                    }
                }
            }
        }
    }

    #[test]
    fn olsfd_dominates() {
        let net = small_net();
        let g = GroupingMatrix::from_sets(&[vec![0], vec![], vec![1]], 2, GroupingScheme::GPwpfzf);
        for family in [Family::Pfzf, Family::Pwpfzf] {
            let opt = evaluate(&net, &g, family, Architecture::Olsfd).unwrap();
            let loc = evaluate(&net, &g, family, Architecture::Local).unwrap();
            let uni = evaluate(&net, &g, family, Architecture::Uniform).unwrap();
            for t in 0..4 {
                assert!(opt.ues[t].sinr >= loc.ues[t].sinr * (1.0 - 1e-12));
                assert!(opt.ues[t].sinr >= uni.ues[t].sinr * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn scale_invariance() {
        let net = small_net();
        let g = GroupingMatrix::from_sets(&[vec![0], vec![1], vec![]], 2, GroupingScheme::GPfzf);
        let cf = ClosedForm::new(&net, &g, Family::Pfzf);
        let w = cf.local_weights();
        let scaled = WeightMatrix { a: &w.a * -7.5 };
        for t in 0..4 {
            let a = cf.ue_sinr(&w, t).sinr;
            let b = cf.ue_sinr(&scaled, t).sinr;
            assert!((a - b).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn diagonal_case_matches_matched_filter() {
        let cfg = ScenarioConfig {
            num_aps: 3,
            antennas_per_ap: 4,
            num_ues: 2,
            num_pilots: 2,
            ..ScenarioConfig::table_i()
        };
        let lsfc = LsfcMatrix(DMatrix::from_row_slice(
            3,
            2,
            &[1.0, 0.2, 0.3, 0.9, 0.05, 0.4],
        ));
        let plan = PilotPlan::from_assignment(vec![0, 1], 2).unwrap();
        let net = Network::from_parts(&cfg, lsfc, plan, PowerConfig::uniform(2, 2.0)).unwrap();
        let g = GroupingMatrix::from_sets(&[vec![0], vec![], vec![1]], 2, GroupingScheme::GPfzf);
        let cf = ClosedForm::new(&net, &g, Family::Pfzf);
        let a = cf.olsfd_weights(0).unwrap();
        for m in 0..3 {
            let expected = cf.coherent(m, 0, 0) / cf.diagonal_load(m, 0);
            assert!((a[m] - expected).abs() <= 1e-12 * expected);
        }
    }
}
