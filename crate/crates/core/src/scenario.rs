//! Network drops, large-scale fading, pilot assignment and transmit powers.
//!
//! Path loss follows the urban-microcell law common in the cell-free
//! literature:
//!
//! ```text
//! beta_dB(d) = -30.5 - 36.7 log10(d / 1 m) + F,   F ~ N(0, sigma^2) dB
//! ```
//!
//! with `d` the 3D distance including the AP height, floored at 1 m.
//! Powers are normalized by the receiver noise power so that `p * beta` is
//! the received SNR.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Path-loss intercept at 1 m, dB.
pub const PATHLOSS_INTERCEPT_DB: f64 = -30.5;
/// Path-loss exponent times ten.
pub const PATHLOSS_SLOPE_DB: f64 = 36.7;
/// Smallest distance fed to the path-loss law.
pub const MIN_DISTANCE_M: f64 = 1.0;
/// Thermal noise density.
pub const NOISE_DENSITY_DBM_HZ: f64 = -174.0;

/// Global simulation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub num_aps: usize,
    pub antennas_per_ap: usize,
    pub num_ues: usize,
    pub num_pilots: usize,
    /// Coherence block length in symbols.
    pub coherence_len: usize,
    pub bandwidth_hz: f64,
    pub max_tx_power_mw: f64,
    pub shadow_sigma_db: f64,
    pub area_side_m: f64,
    pub noise_figure_db: f64,
    pub ap_height_m: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::table_i()
    }
}

impl ScenarioConfig {
    /// The full-scale baseline: 100 APs with 8 antennas, 100 UEs, 7 pilots.
    pub fn table_i() -> Self {
        Self {
            num_aps: 100,
            antennas_per_ap: 8,
            num_ues: 100,
            num_pilots: 7,
            coherence_len: 200,
            bandwidth_hz: 20e6,
            max_tx_power_mw: 100.0,
            shadow_sigma_db: 8.0,
            area_side_m: 1000.0,
            noise_figure_db: 9.0,
            ap_height_m: 10.0,
            seed: 0,
        }
    }

    /// Desk-scale variant used by the validation suite.
    pub fn desk() -> Self {
        Self {
            num_aps: 20,
            num_ues: 10,
            num_pilots: 5,
            ..Self::table_i()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_aps < 1 {
            return Err(Error::config("num_aps", "must be at least 1"));
        }
        if self.antennas_per_ap < 2 {
            return Err(Error::config("antennas_per_ap", "must be at least 2"));
        }
        if self.num_ues < 1 {
            return Err(Error::config("num_ues", "must be at least 1"));
        }
        if self.num_pilots < 1 || self.num_pilots > self.coherence_len {
            return Err(Error::config(
                "num_pilots",
                format!("must lie in [1, coherence_len = {}]", self.coherence_len),
            ));
        }
        if !(self.max_tx_power_mw > 0.0 && self.max_tx_power_mw.is_finite()) {
            return Err(Error::config("max_tx_power_mw", "must be positive"));
        }
        if !(self.area_side_m > 0.0 && self.area_side_m.is_finite()) {
            return Err(Error::config("area_side_m", "must be positive"));
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(Error::config("bandwidth_hz", "must be positive"));
        }
        if !(self.shadow_sigma_db >= 0.0 && self.shadow_sigma_db.is_finite()) {
            return Err(Error::config("shadow_sigma_db", "must be non-negative"));
        }
        if !(self.ap_height_m >= 0.0 && self.ap_height_m.is_finite()) {
            return Err(Error::config("ap_height_m", "must be non-negative"));
        }
        if !self.noise_figure_db.is_finite() {
            return Err(Error::config("noise_figure_db", "must be finite"));
        }
        Ok(())
    }

    /// Receiver noise power in dBm.
    pub fn noise_power_dbm(&self) -> f64 {
        NOISE_DENSITY_DBM_HZ + 10.0 * self.bandwidth_hz.log10() + self.noise_figure_db
    }

    /// Number of uplink data symbols per coherence block, `(L_c - L_p) / 2`.
    pub fn uplink_symbols(&self) -> f64 {
        (self.coherence_len - self.num_pilots) as f64 / 2.0
    }

    /// Pre-log factor of the SE bound, `(1 - L_p / L_c) / 2`.
    pub fn prelog(&self) -> f64 {
        (1.0 - self.num_pilots as f64 / self.coherence_len as f64) / 2.0
    }
}

/// AP and UE positions in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDrop {
    pub ap_positions: Vec<[f64; 2]>,
    pub ue_positions: Vec<[f64; 2]>,
}

/// Large-scale fading coefficients `beta[(m, t)]`, linear scale.
#[derive(Debug, Clone, PartialEq)]
pub struct LsfcMatrix(pub DMatrix<f64>);

impl LsfcMatrix {
    pub fn num_aps(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_ues(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, m: usize, t: usize) -> f64 {
        self.0[(m, t)]
    }

    /// AP with the largest gain towards UE `t` (lowest index on ties).
    pub fn master_ap(&self, t: usize) -> usize {
        let col = self.0.column(t);
        let mut best = 0;
        for m in 1..col.len() {
            if col[m] > col[best] {
                best = m;
            }
        }
        best
    }
}

/// Pilot index of every UE and the resulting sharing sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PilotPlan {
    pub pilot_of_ue: Vec<usize>,
    pub sharing_sets: Vec<Vec<usize>>,
}

impl PilotPlan {
    /// Builds the plan from per-UE pilot indices.
    pub fn from_assignment(pilot_of_ue: Vec<usize>, num_pilots: usize) -> Result<Self> {
        let mut sharing_sets = vec![Vec::new(); num_pilots];
        for (t, &i) in pilot_of_ue.iter().enumerate() {
            if i >= num_pilots {
                return Err(Error::config(
                    "pilot_of_ue",
                    format!("UE {t} uses pilot {i} but only {num_pilots} exist"),
                ));
            }
            sharing_sets[i].push(t);
        }
        Ok(Self {
            pilot_of_ue,
            sharing_sets,
        })
    }

    pub fn num_pilots(&self) -> usize {
        self.sharing_sets.len()
    }

    pub fn num_ues(&self) -> usize {
        self.pilot_of_ue.len()
    }

    pub fn pilot(&self, t: usize) -> usize {
        self.pilot_of_ue[t]
    }

    /// UEs that use pilot `i`.
    pub fn sharers(&self, i: usize) -> &[usize] {
        &self.sharing_sets[i]
    }

    pub fn shares_pilot(&self, t: usize, k: usize) -> bool {
        self.pilot_of_ue[t] == self.pilot_of_ue[k]
    }
}

/// Normalized pilot and data powers (transmit power over noise power).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    pub pilot: Vec<f64>,
    pub data: Vec<f64>,
}

impl PowerConfig {
    pub fn uniform(num_ues: usize, p: f64) -> Self {
        Self {
            pilot: vec![p; num_ues],
            data: vec![p; num_ues],
        }
    }
}

/// Draws AP and UE positions independently and uniformly over the square.
pub fn drop_network<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> NetworkDrop {
    let side = cfg.area_side_m;
    let point = |rng: &mut R| [rng.random::<f64>() * side, rng.random::<f64>() * side];
    let ap_positions = (0..cfg.num_aps).map(|_| point(rng)).collect();
    let ue_positions = (0..cfg.num_ues).map(|_| point(rng)).collect();
    NetworkDrop {
        ap_positions,
        ue_positions,
    }
}

/// Deterministic part of the path loss at 3D distance `d`, in dB.
pub fn pathloss_db(distance_m: f64) -> f64 {
    PATHLOSS_INTERCEPT_DB - PATHLOSS_SLOPE_DB * distance_m.max(MIN_DISTANCE_M).log10()
}

/// Largest gain a link can have without shadowing: an AP directly above the UE.
pub fn max_gain_db(cfg: &ScenarioConfig) -> f64 {
    pathloss_db(cfg.ap_height_m.max(MIN_DISTANCE_M))
}

fn distance_3d(ap: [f64; 2], ue: [f64; 2], height: f64) -> f64 {
    let dx = ap[0] - ue[0];
    let dy = ap[1] - ue[1];
    (dx * dx + dy * dy + height * height)
        .sqrt()
        .max(MIN_DISTANCE_M)
}

/// Path loss plus i.i.d. log-normal shadowing for every (AP, UE) pair.
pub fn compute_lsfc<R: Rng + ?Sized>(
    drop: &NetworkDrop,
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> LsfcMatrix {
    let m_count = drop.ap_positions.len();
    let t_count = drop.ue_positions.len();
    let mut beta = DMatrix::zeros(m_count, t_count);
    // column-major fill keeps the shadowing draw order fixed: UE by UE
    for t in 0..t_count {
        for m in 0..m_count {
            let d = distance_3d(drop.ap_positions[m], drop.ue_positions[t], cfg.ap_height_m);
            let shadow: f64 = if cfg.shadow_sigma_db > 0.0 {
                cfg.shadow_sigma_db * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            beta[(m, t)] = 10f64.powf((pathloss_db(d) + shadow) / 10.0);
        }
    }
    LsfcMatrix(beta)
}

/// Greedy scalable pilot assignment.
///
/// UEs are visited in descending order of their best gain. The first
/// `min(T, L_p)` get distinct pilots; each later UE takes the pilot with the
/// least interference at its master AP.
pub fn assign_pilots(lsfc: &LsfcMatrix, cfg: &ScenarioConfig) -> PilotPlan {
    let t_count = lsfc.num_ues();
    let num_pilots = cfg.num_pilots;
    let best_gain: Vec<f64> = (0..t_count).map(|t| lsfc.0.column(t).max()).collect();
    let mut order: Vec<usize> = (0..t_count).collect();
    order.sort_by(|&a, &b| best_gain[b].total_cmp(&best_gain[a]).then(a.cmp(&b)));

    let mut pilot_of_ue = vec![usize::MAX; t_count];
    let mut sets: Vec<Vec<usize>> = vec![Vec::new(); num_pilots];
    for (rank, &t) in order.iter().enumerate() {
        let pilot = if rank < num_pilots {
            rank
        } else {
            let master = lsfc.master_ap(t);
            let mut best = 0;
            let mut best_interference = f64::INFINITY;
            for (i, set) in sets.iter().enumerate() {
                let interference: f64 = set.iter().map(|&k| lsfc.get(master, k)).sum();
                if interference < best_interference {
                    best_interference = interference;
                    best = i;
                }
            }
            best
        };
        pilot_of_ue[t] = pilot;
        sets[pilot].push(t);
    }
    for set in &mut sets {
        set.sort_unstable();
    }
    PilotPlan {
        pilot_of_ue,
        sharing_sets: sets,
    }
}

/// Full transmit power during training and data, normalized by the noise power.
pub fn compute_powers(cfg: &ScenarioConfig) -> PowerConfig {
    let noise_mw = 10f64.powf(cfg.noise_power_dbm() / 10.0);
    PowerConfig::uniform(cfg.num_ues, cfg.max_tx_power_mw / noise_mw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    fn small_cfg() -> ScenarioConfig {
        ScenarioConfig {
            num_aps: 6,
            num_ues: 10,
            num_pilots: 4,
            seed: 7,
            ..ScenarioConfig::table_i()
        }
    }

    #[test]
    fn drop_is_deterministic_and_inside_square() {
        let cfg = ScenarioConfig::table_i();
        let a = drop_network(&cfg, &mut stream_rng(7, Stream::Positions, 0));
        let b = drop_network(&cfg, &mut stream_rng(7, Stream::Positions, 0));
        assert_eq!(a, b);
        assert_eq!(a.ap_positions.len(), 100);
        assert_eq!(a.ue_positions.len(), 100);
        for p in a.ap_positions.iter().chain(&a.ue_positions) {
            assert!((0.0..=1000.0).contains(&p[0]) && (0.0..=1000.0).contains(&p[1]));
        }
        let c = drop_network(&cfg, &mut stream_rng(8, Stream::Positions, 0));
        assert_ne!(a, c);
    }

    #[test]
    fn colocated_nodes_hit_the_gain_cap() {
        let cfg = ScenarioConfig {
            shadow_sigma_db: 0.0,
            ..small_cfg()
        };
        let drop = NetworkDrop {
            ap_positions: vec![[10.0, 10.0]],
            ue_positions: vec![[10.0, 10.0]],
        };
        let beta = compute_lsfc(&drop, &cfg, &mut stream_rng(0, Stream::Shadowing, 0));
        let expected_db = -30.5 - 36.7 * 10f64.log10();
        assert!((10.0 * beta.get(0, 0).log10() - expected_db).abs() < 1e-9);
        assert!((max_gain_db(&cfg) - expected_db).abs() < 1e-12);

        let floor = ScenarioConfig {
            ap_height_m: 0.0,
            ..cfg
        };
        assert!((max_gain_db(&floor) - (-30.5)).abs() < 1e-12);
    }

    #[test]
    fn doubling_distance_costs_eleven_db() {
        let drop_db = pathloss_db(100.0) - pathloss_db(200.0);
        assert!((drop_db - 36.7 * 2f64.log10()).abs() < 1e-12);
        assert!((drop_db - 11.048).abs() < 1e-3);
    }

    #[test]
    fn equidistant_ues_get_equal_gain_without_shadowing() {
        let cfg = ScenarioConfig {
            shadow_sigma_db: 0.0,
            ..small_cfg()
        };
        let drop = NetworkDrop {
            ap_positions: vec![[500.0, 500.0]],
            ue_positions: vec![[600.0, 500.0], [500.0, 400.0], [700.0, 500.0]],
        };
        let beta = compute_lsfc(&drop, &cfg, &mut stream_rng(0, Stream::Shadowing, 0));
        assert_eq!(beta.get(0, 0), beta.get(0, 1));
        assert!(beta.get(0, 2) < beta.get(0, 0));
    }

    #[test]
    fn enough_pilots_means_orthogonal() {
        let cfg = ScenarioConfig {
            num_ues: 3,
            num_pilots: 3,
            ..small_cfg()
        };
        let drop = drop_network(&cfg, &mut stream_rng(1, Stream::Positions, 0));
        let lsfc = compute_lsfc(&drop, &cfg, &mut stream_rng(1, Stream::Shadowing, 0));
        let plan = assign_pilots(&lsfc, &cfg);
        let mut pilots = plan.pilot_of_ue.clone();
        pilots.sort_unstable();
        assert_eq!(pilots, vec![0, 1, 2]);
    }

    #[test]
    fn single_pilot_is_shared() {
        let cfg = ScenarioConfig {
            num_ues: 2,
            num_pilots: 1,
            ..small_cfg()
        };
        let lsfc = LsfcMatrix(DMatrix::from_element(6, 2, 1e-9));
        let plan = assign_pilots(&lsfc, &cfg);
        assert_eq!(plan.pilot_of_ue, vec![0, 0]);
        assert_eq!(plan.sharing_sets, vec![vec![0, 1]]);
    }

    #[test]
    fn noise_and_power_normalization() {
        let cfg = ScenarioConfig::table_i();
        let noise = cfg.noise_power_dbm();
        assert!((noise - (-174.0 + 10.0 * 20e6f64.log10() + 9.0)).abs() < 1e-12);
        assert!((noise + 91.99).abs() < 0.01);
        let pw = compute_powers(&cfg);
        let expected = 10f64.powf((20.0 - noise) / 10.0);
        assert!(pw
            .data
            .iter()
            .all(|&p| (p - expected).abs() / expected < 1e-12));
        assert_eq!(pw.pilot, pw.data);
    }

    #[test]
    fn zero_power_is_rejected() {
        let cfg = ScenarioConfig {
            max_tx_power_mw: 0.0,
            ..ScenarioConfig::table_i()
        };
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig { .. })));
        let cfg = ScenarioConfig {
            num_pilots: 201,
            ..ScenarioConfig::table_i()
        };
        assert!(cfg.validate().is_err());
        let cfg = ScenarioConfig {
            antennas_per_ap: 1,
            ..ScenarioConfig::table_i()
        };
        assert!(cfg.validate().is_err());
    }
}
