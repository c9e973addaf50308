//! Closed-form MMSE channel-estimation statistics.
//!
//! With an orthogonal pilot book every inner product `|psi_i^H psi_k|^2` is 0 or 1,
//! so all statistics reduce to sums over pilot-sharing sets.

use nalgebra::DMatrix;

use crate::scenario::{LsfcMatrix, PilotPlan, PowerConfig, ScenarioConfig};

/// Per-(AP, UE) estimate statistics and per-(AP, pilot) received pilot power.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    /// Per-antenna variance of the MMSE estimate, `M x T`.
    pub gamma: DMatrix<f64>,
    /// MMSE scaling applied to the despread pilot signal, `M x T`.
    pub c: DMatrix<f64>,
    /// Per-antenna power of the despread pilot column, `M x L_p`. Always >= 1.
    pub theta: DMatrix<f64>,
}

impl ChannelStats {
    pub fn num_aps(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn num_ues(&self) -> usize {
        self.gamma.ncols()
    }

    pub fn num_pilots(&self) -> usize {
        self.theta.ncols()
    }
}

/// Computes `gamma`, `c` and `theta` for every AP.
pub fn compute_stats(
    lsfc: &LsfcMatrix,
    plan: &PilotPlan,
    pw: &PowerConfig,
    cfg: &ScenarioConfig,
) -> ChannelStats {
    let m_count = lsfc.num_aps();
    let t_count = lsfc.num_ues();
    let lp = cfg.num_pilots as f64;
    let mut theta = DMatrix::from_element(m_count, plan.num_pilots(), 1.0);
    for m in 0..m_count {
        for (i, set) in plan.sharing_sets.iter().enumerate() {
            theta[(m, i)] += set
                .iter()
                .map(|&k| pw.pilot[k] * lp * lsfc.get(m, k))
                .sum::<f64>();
        }
    }
    let mut gamma = DMatrix::zeros(m_count, t_count);
    let mut c = DMatrix::zeros(m_count, t_count);
    for t in 0..t_count {
        let i = plan.pilot(t);
        let amplitude = (pw.pilot[t] * lp).sqrt();
        for m in 0..m_count {
            let beta = lsfc.get(m, t);
            let denom = theta[(m, i)];
            c[(m, t)] = amplitude * beta / denom;
            gamma[(m, t)] = pw.pilot[t] * lp * beta * beta / denom;
        }
    }
    ChannelStats { gamma, c, theta }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(num_pilots: usize) -> ScenarioConfig {
        ScenarioConfig {
            num_aps: 1,
            num_ues: 2,
            num_pilots,
            ..ScenarioConfig::table_i()
        }
    }

    #[test]
    fn lone_ue_with_unit_snr_gets_half_the_variance() {
        // p * L_p * beta = 1 with L_p = 1
        let beta = 1e-9;
        let lsfc = LsfcMatrix(DMatrix::from_element(1, 1, beta));
        let plan = PilotPlan::from_assignment(vec![0], 1).unwrap();
        let pw = PowerConfig::uniform(1, 1.0 / beta);
        let s = compute_stats(&lsfc, &plan, &pw, &cfg(1));
        assert!((s.gamma[(0, 0)] - beta / 2.0).abs() < 1e-24);
        assert!((s.theta[(0, 0)] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn two_sharers_get_a_third() {
        let beta = 2e-10;
        let lsfc = LsfcMatrix(DMatrix::from_element(1, 2, beta));
        let plan = PilotPlan::from_assignment(vec![0, 0], 1).unwrap();
        let pw = PowerConfig::uniform(2, 1.0 / beta);
        let s = compute_stats(&lsfc, &plan, &pw, &cfg(1));
        for t in 0..2 {
            assert!((s.gamma[(0, t)] / beta - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!((s.theta[(0, 0)] - 3.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn identities_hold(
            betas in proptest::collection::vec(-14.0f64..-6.0, 12),
            pilots in proptest::collection::vec(0usize..3, 4),
            p_db in 60.0f64..120.0,
        ) {
            let lsfc = LsfcMatrix(DMatrix::from_iterator(3, 4, betas.iter().map(|e| 10f64.powf(*e))));
            let plan = PilotPlan::from_assignment(pilots.clone(), 3).unwrap();
            let pw = PowerConfig::uniform(4, 10f64.powf(p_db / 10.0));
            let config = ScenarioConfig { num_aps: 3, num_ues: 4, num_pilots: 3, ..ScenarioConfig::table_i() };
            let s = compute_stats(&lsfc, &plan, &pw, &config);
            for m in 0..3 {
                for i in 0..3 {
                    prop_assert!(s.theta[(m, i)] >= 1.0);
                }
                for t in 0..4 {
                    let g = s.gamma[(m, t)];
                    let b = lsfc.get(m, t);
                    prop_assert!(g > 0.0 && g <= b);
                    let c2theta = s.c[(m, t)].powi(2) * s.theta[(m, pilots[t])];
                    prop_assert!((c2theta - g).abs() <= 1e-12 * g);
                    for k in 0..4 {
                        if k != t && pilots[k] == pilots[t] {
                            let ratio = g / s.gamma[(m, k)];
                            let expected = b * b / (lsfc.get(m, k) * lsfc.get(m, k));
                            prop_assert!((ratio / expected - 1.0).abs() < 1e-10);
                        }
                    }
                }
            }
        }

        #[test]
        fn contamination_never_helps(extra_db in -20.0f64..20.0) {
            let base = LsfcMatrix(DMatrix::from_row_slice(1, 2, &[1e-9, 1e-10]));
            let more = LsfcMatrix(DMatrix::from_row_slice(1, 2, &[1e-9, 1e-10 * 10f64.powf(extra_db.abs() / 10.0)]));
            let plan = PilotPlan::from_assignment(vec![0, 0], 1).unwrap();
            let pw = PowerConfig::uniform(2, 1e10);
            let a = compute_stats(&base, &plan, &pw, &cfg(1));
            let b = compute_stats(&more, &plan, &pw, &cfg(1));
            prop_assert!(b.gamma[(0, 0)] <= a.gamma[(0, 0)]);
        }
    }
}
