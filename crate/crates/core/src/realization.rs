//! Small-scale fading draws, pilot despreading and MMSE estimates.
//!
//! The pilot book is never materialized: despreading with a unitary book
//! yields `G_bar_m = sum_k sqrt(p_k L_p) g_mk e_{i_k}^T + N_bar_m` directly, with
//! `N_bar_m` again i.i.d. unit-variance complex Gaussian.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::network::Network;
use crate::rng::complex_normal;
use crate::scenario::PowerConfig;

/// One coherence block worth of channels and estimates.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// True channels, one `A x T` matrix per AP.
    pub g: Vec<DMatrix<Complex64>>,
    /// Despread pilot observation, one `A x L_p` matrix per AP.
    pub gbar: Vec<DMatrix<Complex64>>,
    /// MMSE estimates, one `A x T` matrix per AP.
    pub ghat: Vec<DMatrix<Complex64>>,
    /// Set when the pilot phase was simulated without receiver noise.
    pub noiseless: bool,
}

impl ChannelRealization {
    /// Estimation error `g - g_hat` at AP `m`.
    pub fn error(&self, m: usize) -> DMatrix<Complex64> {
        &self.g[m] - &self.ghat[m]
    }
}

fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<Complex64> {
    // draw column by column so the stream layout matches the storage order
    DMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

/// Draws `g`, forms `G_bar` and the MMSE estimates.
pub fn draw_realization<R: Rng + ?Sized>(net: &Network, rng: &mut R) -> ChannelRealization {
    draw_with_noise(net, rng, true)
}

/// Same as [`draw_realization`] but with an optional noiseless pilot phase.
pub fn draw_with_noise<R: Rng + ?Sized>(
    net: &Network,
    rng: &mut R,
    pilot_noise: bool,
) -> ChannelRealization {
    let a = net.antennas();
    let t_count = net.num_ues();
    let lp = net.num_pilots();
    let lp_f = net.cfg.num_pilots as f64;
    let mut g = Vec::with_capacity(net.num_aps());
    let mut gbar = Vec::with_capacity(net.num_aps());
    let mut ghat = Vec::with_capacity(net.num_aps());
    for m in 0..net.num_aps() {
        let mut gm = gaussian_matrix(a, t_count, rng);
        for t in 0..t_count {
            let scale = net.beta(m, t).sqrt();
            gm.column_mut(t).scale_mut(scale);
        }
        let mut gb = if pilot_noise {
            gaussian_matrix(a, lp, rng)
        } else {
            DMatrix::zeros(a, lp)
        };
        for t in 0..t_count {
            let amp = (net.powers.pilot[t] * lp_f).sqrt();
            let i = net.plan.pilot(t);
            let col = gm.column(t) * Complex64::from(amp);
            let mut target = gb.column_mut(i);
            target += col;
        }
        let mut gh = DMatrix::zeros(a, t_count);
        for t in 0..t_count {
            let c = net.stats.c[(m, t)];
            gh.set_column(t, &(gb.column(net.plan.pilot(t)) * Complex64::from(c)));
        }
        g.push(gm);
        gbar.push(gb);
        ghat.push(gh);
    }
    ChannelRealization {
        g,
        gbar,
        ghat,
        noiseless: !pilot_noise,
    }
}

/// Received uplink data signal `y_m = sum_t sqrt(p_t) g_mt x_t + n_m` at every AP.
pub fn received_uplink<R: Rng + ?Sized>(
    real: &ChannelRealization,
    symbols: &[Complex64],
    pw: &PowerConfig,
    with_noise: bool,
    rng: &mut R,
) -> Vec<DVector<Complex64>> {
    real.g
        .iter()
        .map(|gm| {
            let a = gm.nrows();
            let mut y = if with_noise {
                DVector::from_fn(a, |_, _| complex_normal(rng))
            } else {
                DVector::zeros(a)
            };
            for (t, x) in symbols.iter().enumerate() {
                y += gm.column(t) * (x * pw.data[t].sqrt());
            }
            y
        })
        .collect()
}

/// Unit-modulus symbol with uniform phase.
pub fn random_phase_symbol<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use crate::scenario::{LsfcMatrix, PilotPlan, ScenarioConfig};

    fn tiny_network() -> Network {
        let cfg = ScenarioConfig {
            num_aps: 2,
            antennas_per_ap: 4,
            num_ues: 3,
            num_pilots: 2,
            ..ScenarioConfig::table_i()
        };
        let lsfc = LsfcMatrix(DMatrix::from_row_slice(
            2,
            3,
            &[1.0, 0.5, 0.2, 0.3, 2.0, 0.7],
        ));
        let plan = PilotPlan::from_assignment(vec![0, 1, 0], 2).unwrap();
        let powers = PowerConfig::uniform(3, 1.5);
        Network::from_parts(&cfg, lsfc, plan, powers).unwrap()
    }

    #[test]
    fn estimates_are_scaled_pilot_columns() {
        let net = tiny_network();
        let real = draw_realization(&net, &mut stream_rng(3, Stream::Channel, 0));
        for m in 0..2 {
            for t in 0..3 {
                let expected =
                    real.gbar[m].column(net.plan.pilot(t)) * Complex64::from(net.stats.c[(m, t)]);
                assert_eq!(real.ghat[m].column(t), expected.column(0));
            }
            // UEs 0 and 2 share pilot 0: parallel estimates
            let a = real.ghat[m].column(0) / Complex64::from(net.stats.c[(m, 0)]);
            let b = real.ghat[m].column(2) / Complex64::from(net.stats.c[(m, 2)]);
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn estimate_and_error_variances() {
        let net = tiny_network();
        let n = 100_000;
        let mut rng = stream_rng(11, Stream::Channel, 0);
        let (mut est, mut err, mut cross) = (0.0, 0.0, Complex64::new(0.0, 0.0));
        let mut col = 0.0;
        for _ in 0..n {
            let real = draw_realization(&net, &mut rng);
            let h = real.ghat[1][(0, 1)];
            let e = real.g[1][(0, 1)] - h;
            est += h.norm_sqr();
            err += e.norm_sqr();
            cross += h * e.conj();
            col += real.gbar[1].column(0).norm_squared() / 4.0;
        }
        let n = n as f64;
        let (gamma, beta) = (net.gamma(1, 1), net.beta(1, 1));
        assert!((est / n / gamma - 1.0).abs() < 0.02);
        assert!((err / n / (beta - gamma) - 1.0).abs() < 0.02);
        // 3 sigma bound of the sample correlation
        let bound = 3.0 * (gamma * (beta - gamma)).sqrt() / n.sqrt();
        assert!(
            (cross / n).norm() < bound,
            "{} vs {}",
            (cross / n).norm(),
            bound
        );
        assert!((col / n / net.stats.theta[(1, 0)] - 1.0).abs() < 0.02);
    }

    #[test]
    fn uplink_signal_properties() {
        let net = tiny_network();
        let mut rng = stream_rng(5, Stream::Channel, 0);
        let real = draw_realization(&net, &mut rng);
        let zero = [Complex64::new(0.0, 0.0); 3];
        let y = received_uplink(&real, &zero, &net.powers, false, &mut rng);
        assert!(y.iter().all(|v| v.norm() == 0.0));

        // a single active UE without noise lands on its own channel direction
        let one = [
            Complex64::new(0.0, 0.0),
            Complex64::new(0.6, 0.8),
            Complex64::new(0.0, 0.0),
        ];
        let y = received_uplink(&real, &one, &net.powers, false, &mut rng);
        let g = real.g[0].column(1);
        let ratio = y[0][0] / g[0];
        assert!((y[0].clone() - g * ratio).norm() < 1e-12 * y[0].norm());

        let n = 100_000;
        let mut power = 0.0;
        for _ in 0..n {
            let real = draw_realization(&net, &mut rng);
            let x: Vec<Complex64> = (0..3).map(|_| random_phase_symbol(&mut rng)).collect();
            let y = received_uplink(&real, &x, &net.powers, true, &mut rng);
            power += y[0][2].norm_sqr();
        }
        let expected: f64 = (0..3)
            .map(|t| net.powers.data[t] * net.beta(0, t))
            .sum::<f64>()
            + 1.0;
        assert!((power / n as f64 / expected - 1.0).abs() < 0.02);
    }
}
