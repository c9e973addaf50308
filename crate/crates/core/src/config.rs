//! Plain-text `key = value` configuration files.
//!
//! One setting per line, `#` starts a comment, dotted keys group options
//! (`pga.alpha`, `mc.trials`). Every diagnostic carries the file path, line
//! number and key.
//!
//! ```text
//! preset = desk
//! num_ues = 20
//! pga.alpha = 0.05
//! threshold.quantile = 0.9
//! ```

use std::collections::HashSet;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grouping::GroupingOptions;
use crate::montecarlo::{Estimator, McConfig};
use crate::scenario::ScenarioConfig;

/// One `key = value` line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// A parsed key-value file; keys are unique.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KvFile {
    pub path: PathBuf,
    pub entries: Vec<Entry>,
}

impl KvFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut entries: Vec<Entry> = Vec::new();
        let mut seen = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    key: content.to_string(),
                    reason: "expected `key = value`".into(),
                });
            };
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    key: key.to_string(),
                    reason: "keys must be non-empty and contain no whitespace".into(),
                });
            }
            if !seen.insert(key.to_string()) {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    key: key.to_string(),
                    reason: "duplicate key".into(),
                });
            }
            entries.push(Entry {
                line,
                key: key.to_string(),
                value: value.to_string(),
            });
        }
        Ok(Self {
            path: path.to_path_buf(),
            entries,
        })
    }

    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn error(&self, entry: &Entry, reason: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line: entry.line,
            key: entry.key.clone(),
            reason: reason.into(),
        }
    }

    pub fn value<T>(&self, entry: &Entry) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        entry
            .value
            .parse()
            .map_err(|e| self.error(entry, format!("cannot parse `{}`: {e}", entry.value)))
    }

    /// Comma-separated list; empty items are rejected.
    pub fn list<T>(&self, entry: &Entry) -> Result<Vec<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        entry
            .value
            .split(',')
            .map(|item| {
                let item = item.trim();
                if item.is_empty() {
                    return Err(self.error(entry, "empty list item"));
                }
                item.parse()
                    .map_err(|e| self.error(entry, format!("cannot parse `{item}`: {e}")))
            })
            .collect()
    }

    /// Attaches the line of the offending key to a validation error.
    pub fn locate(&self, err: Error) -> Error {
        match err {
            Error::InvalidConfig { key, reason } => Error::Parse {
                path: self.path.clone(),
                line: self.get(&key).map_or(0, |e| e.line),
                key,
                reason,
            },
            other => other,
        }
    }
}

/// Scenario plus the grouping and Monte Carlo options that ride along with it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimulationConfig {
    pub scenario: ScenarioConfig,
    pub grouping: GroupingOptions,
    pub mc: McConfig,
}

fn parse_estimator(s: &str) -> std::result::Result<Estimator, String> {
    match s {
        "sample" => Ok(Estimator::Sample),
        "conditional" => Ok(Estimator::Conditional),
        _ => Err("expected sample|conditional".into()),
    }
}

impl SimulationConfig {
    pub fn read(path: &Path) -> Result<Self> {
        Self::from_kv(&KvFile::read(path)?)
    }

    /// Starts from `preset` (`table_i` unless given) and applies every other key.
    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        let scenario = match kv.get("preset") {
            None => ScenarioConfig::table_i(),
            Some(e) => match e.value.as_str() {
                "table_i" => ScenarioConfig::table_i(),
                "desk" => ScenarioConfig::desk(),
                other => {
                    return Err(kv.error(
                        e,
                        format!("unknown preset `{other}` (expected table_i|desk)"),
                    ))
                }
            },
        };
        let mut out = Self {
            scenario,
            ..Self::default()
        };
        for e in &kv.entries {
            let s = &mut out.scenario;
            let pga = &mut out.grouping.pga;
            let mc = &mut out.mc;
            match e.key.as_str() {
                "preset" => {}
                "num_aps" => s.num_aps = kv.value(e)?,
                "antennas_per_ap" => s.antennas_per_ap = kv.value(e)?,
                "num_ues" => s.num_ues = kv.value(e)?,
                "num_pilots" => s.num_pilots = kv.value(e)?,
                "coherence_len" => s.coherence_len = kv.value(e)?,
                "bandwidth_hz" => s.bandwidth_hz = kv.value(e)?,
                "max_tx_power_mw" => s.max_tx_power_mw = kv.value(e)?,
                "shadow_sigma_db" => s.shadow_sigma_db = kv.value(e)?,
                "area_side_m" => s.area_side_m = kv.value(e)?,
                "noise_figure_db" => s.noise_figure_db = kv.value(e)?,
                "ap_height_m" => s.ap_height_m = kv.value(e)?,
                "seed" => s.seed = kv.value(e)?,
                "pga.alpha" => pga.step_size = kv.value(e)?,
                "pga.chi_init" => pga.chi_init = kv.value(e)?,
                "pga.delta_growth" => pga.delta_growth = kv.value(e)?,
                "pga.lambda1" => pga.lambda1 = kv.value(e)?,
                "pga.lambda2" => pga.lambda2 = kv.value(e)?,
                "pga.inner_tol" => pga.inner_tol = kv.value(e)?,
                "pga.outer_tol" => pga.outer_tol = kv.value(e)?,
                "pga.max_inner" => pga.max_inner = kv.value(e)?,
                "pga.max_outer" => pga.max_outer = kv.value(e)?,
                "pga.delta_init" => pga.delta_init = kv.value(e)?,
                "threshold.quantile" => out.grouping.quantile = kv.value(e)?,
                "mc.trials" => mc.num_trials = kv.value(e)?,
                "mc.seed" => mc.seed = kv.value(e)?,
                "mc.rejection_budget" => mc.rejection_budget = kv.value(e)?,
                "mc.report_ci" => mc.report_ci = kv.value(e)?,
                "mc.pilot_noise" => mc.pilot_noise = kv.value(e)?,
                "mc.data_noise" => mc.data_noise = kv.value(e)?,
                "mc.estimator" => {
                    mc.estimator = parse_estimator(&e.value).map_err(|r| kv.error(e, r))?
                }
                _ => return Err(kv.error(e, "unknown key")),
            }
        }
        out.validate().map_err(|err| kv.locate(err))?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.grouping.pga.validate()?;
        let q = self.grouping.quantile;
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::config("threshold.quantile", "must lie in (0, 1]"));
        }
        self.mc.validate()
    }
}
