//! A fully specified deployment: configuration, geometry, fading, pilots,
//! powers and the derived estimation statistics.

use crate::chanstats::{compute_stats, ChannelStats};
use crate::error::Result;
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::scenario::{
    assign_pilots, compute_lsfc, compute_powers, drop_network, LsfcMatrix, NetworkDrop, PilotPlan,
    PowerConfig, ScenarioConfig,
};

#[derive(Debug, Clone)]
pub struct Network {
    pub cfg: ScenarioConfig,
    pub drop: Option<NetworkDrop>,
    pub lsfc: LsfcMatrix,
    pub plan: PilotPlan,
    pub powers: PowerConfig,
    pub stats: ChannelStats,
}

impl Network {
    /// Random drop number `drop_index` of the configured scenario.
    pub fn generate(cfg: &ScenarioConfig, drop_index: u64) -> Result<Self> {
        cfg.validate()?;
        let seed = derive_seed(cfg.seed, drop_index);
        let drop = drop_network(cfg, &mut stream_rng(seed, Stream::Positions, 0));
        let lsfc = compute_lsfc(&drop, cfg, &mut stream_rng(seed, Stream::Shadowing, 0));
        let plan = assign_pilots(&lsfc, cfg);
        let powers = compute_powers(cfg);
        let stats = compute_stats(&lsfc, &plan, &powers, cfg);
        Ok(Self {
            cfg: cfg.clone(),
            drop: Some(drop),
            lsfc,
            plan,
            powers,
            stats,
        })
    }

    /// Deployment with caller-supplied fading, pilots and powers.
    pub fn from_parts(
        cfg: &ScenarioConfig,
        lsfc: LsfcMatrix,
        plan: PilotPlan,
        powers: PowerConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let stats = compute_stats(&lsfc, &plan, &powers, cfg);
        Ok(Self {
            cfg: cfg.clone(),
            drop: None,
            lsfc,
            plan,
            powers,
            stats,
        })
    }

    pub fn num_aps(&self) -> usize {
        self.lsfc.num_aps()
    }

    pub fn num_ues(&self) -> usize {
        self.lsfc.num_ues()
    }

    pub fn num_pilots(&self) -> usize {
        self.plan.num_pilots()
    }

    pub fn antennas(&self) -> usize {
        self.cfg.antennas_per_ap
    }

    pub fn beta(&self, m: usize, t: usize) -> f64 {
        self.lsfc.get(m, t)
    }

    pub fn gamma(&self, m: usize, t: usize) -> f64 {
        self.stats.gamma[(m, t)]
    }
}
