//! Uplink distributed massive MIMO simulation with adaptive local
//! zero-forcing, per-AP pilot grouping and decentralized decoding.
//!
//! The pipeline is: [`scenario`] draws a deployment, [`chanstats`] derives
//! the estimation statistics, [`grouping`] picks strong pilots per AP,
//! [`sedecode`] evaluates closed-form SINR/SE, and [`montecarlo`] checks the
//! closed forms against simulated channels built by [`realization`] and
//! [`combining`]. [`experiments`] and [`costs`] drive batch runs.

pub mod chanstats;
pub mod combining;
pub mod config;
pub mod costs;
pub mod error;
pub mod experiments;
pub mod grouping;
pub mod montecarlo;
pub mod network;
pub mod realization;
pub mod rng;
pub mod scenario;
pub mod scheme;
pub mod sedecode;

pub use config::SimulationConfig;
pub use error::{Error, Result};
pub use experiments::{run_experiment, ExperimentSpec};
pub use network::Network;
pub use scenario::ScenarioConfig;
pub use scheme::{Architecture, Family, GroupingScheme};
