//! Fronthaul and multiply/divide counts per coherence block.
//!
//! Decoding costs are per UE; combining costs are per AP. Only
//! multiplications and divisions are counted.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::ScenarioConfig;
use crate::scheme::{Architecture, GroupingScheme};

/// CPU-side decoding variant with a cost model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DecodingRow {
    /// Optimal large-scale fading decoding at the CPU.
    Olsfd,
    /// Local weights applied at each AP; the CPU only sums.
    Decentralized,
}

impl DecodingRow {
    pub const ALL: [DecodingRow; 2] = [DecodingRow::Olsfd, DecodingRow::Decentralized];

    /// `Uniform` has no weight computation and no cost row.
    pub fn from_architecture(arch: Architecture) -> Option<Self> {
        match arch {
            Architecture::Olsfd => Some(DecodingRow::Olsfd),
            Architecture::Local => Some(DecodingRow::Decentralized),
            Architecture::Uniform => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DecodingRow::Olsfd => "olsfd",
            DecodingRow::Decentralized => "local",
        }
    }
}

/// Combining-vector cost model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CombiningRow {
    Pfzf,
    GPfzf,
    Pwpfzf,
    GPwpfzf,
}

impl CombiningRow {
    pub const ALL: [CombiningRow; 4] = [
        CombiningRow::Pfzf,
        CombiningRow::GPfzf,
        CombiningRow::Pwpfzf,
        CombiningRow::GPwpfzf,
    ];

    pub fn from_scheme(scheme: GroupingScheme) -> Option<Self> {
        match scheme {
            GroupingScheme::ThresholdPfzf => Some(CombiningRow::Pfzf),
            GroupingScheme::GPfzf => Some(CombiningRow::GPfzf),
            GroupingScheme::ThresholdPwpfzf => Some(CombiningRow::Pwpfzf),
            GroupingScheme::GPwpfzf => Some(CombiningRow::GPwpfzf),
            GroupingScheme::AllMr | GroupingScheme::AllFzf => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CombiningRow::Pfzf => "pfzf",
            CombiningRow::GPfzf => "gpfzf",
            CombiningRow::Pwpfzf => "pwpfzf",
            CombiningRow::GPwpfzf => "gpwpfzf",
        }
    }

    fn generalized(self) -> bool {
        matches!(self, CombiningRow::GPfzf | CombiningRow::GPwpfzf)
    }

    fn protected(self) -> bool {
        matches!(self, CombiningRow::Pwpfzf | CombiningRow::GPwpfzf)
    }
}

/// What `L_u` stands for in the fronthaul formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LuMeaning {
    /// Uplink data symbols per block, `(L_c - L_p) / 2`.
    #[default]
    Symbols,
    /// The dimensionless SE pre-log `(1 - L_p / L_c) / 2`.
    Prelog,
}

impl LuMeaning {
    pub fn value(self, cfg: &ScenarioConfig) -> f64 {
        match self {
            LuMeaning::Symbols => cfg.uplink_symbols(),
            LuMeaning::Prelog => cfg.prelog(),
        }
    }
}

/// Costs of one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    /// Complex scalars per UE per coherence block.
    pub fronthaul_scalars: f64,
    /// Multiplications and divisions per UE per block for the decoding weights.
    pub weight_compute: f64,
    /// Multiplications and divisions per AP per block for the combiners.
    pub combiner_compute: f64,
}

/// Fronthaul scalars and weight computation for one decoding row.
pub fn decoding_costs(num_aps: usize, num_ues: usize, lu: f64, row: DecodingRow) -> (f64, f64) {
    let m = num_aps as f64;
    let t = num_ues as f64;
    let shared = (m * m + m) / 2.0 * t + m * m;
    match row {
        DecodingRow::Olsfd => (
            lu * m + (3.0 * m * t + m) / 2.0,
            shared + (m * m * m - m) / 3.0,
        ),
        DecodingRow::Decentralized => (lu * m, shared + m),
    }
}

/// Combining-vector cost at one AP with `L_S` strong pilots.
pub fn combining_costs(
    antennas: usize,
    num_pilots: usize,
    strong_count: usize,
    num_ues: usize,
    row: CombiningRow,
) -> Result<f64> {
    if antennas < 1 {
        return Err(Error::config("antennas_per_ap", "must be at least 1"));
    }
    if strong_count > num_pilots {
        return Err(Error::config(
            "strong_count",
            format!("{strong_count} strong pilots exceed {num_pilots} pilots"),
        ));
    }
    let a = antennas as f64;
    let l = strong_count as f64;
    let mut cost = 1.5 * l * l * a + l * a / 2.0 + (l * l * l - l) / 3.0;
    if row.protected() {
        cost += 2.0 * (num_pilots as f64 - l) * l * a;
    }
    cost += if row.generalized() {
        a * num_pilots as f64
    } else {
        a * num_ues as f64
    };
    Ok(cost)
}

/// Full cost report for a scenario, decoding row, combining row and `L_S`.
pub fn cost_report(
    cfg: &ScenarioConfig,
    lu: LuMeaning,
    decoding: DecodingRow,
    combining: CombiningRow,
    strong_count: usize,
) -> Result<CostReport> {
    let (fronthaul, weight) = decoding_costs(cfg.num_aps, cfg.num_ues, lu.value(cfg), decoding);
    let combiner = combining_costs(
        cfg.antennas_per_ap,
        cfg.num_pilots,
        strong_count,
        cfg.num_ues,
        combining,
    )?;
    Ok(CostReport {
        fronthaul_scalars: fronthaul,
        weight_compute: weight,
        combiner_compute: combiner,
    })
}

/// Scenario dimension varied by a cost sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CostSweep {
    NumUes,
    NumAps,
    NumPilots,
    Antennas,
    StrongPilots,
}

impl CostSweep {
    pub const ALL: [CostSweep; 5] = [
        CostSweep::NumUes,
        CostSweep::NumAps,
        CostSweep::NumPilots,
        CostSweep::Antennas,
        CostSweep::StrongPilots,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CostSweep::NumUes => "num_ues",
            CostSweep::NumAps => "num_aps",
            CostSweep::NumPilots => "num_pilots",
            CostSweep::Antennas => "antennas",
            CostSweep::StrongPilots => "strong_pilots",
        }
    }
}

impl fmt::Display for CostSweep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CostSweep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CostSweep::ALL
            .into_iter()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| {
                Error::config(
                    "sweep",
                    format!("unknown cost sweep `{s}` (expected num_ues|num_aps|num_pilots|antennas|strong_pilots)"),
                )
            })
    }
}

/// Cost quantity reported in a sweep row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMetric {
    Fronthaul,
    WeightCompute,
    CombinerCompute,
}

impl CostMetric {
    pub fn name(self) -> &'static str {
        match self {
            CostMetric::Fronthaul => "fronthaul",
            CostMetric::WeightCompute => "weight_compute",
            CostMetric::CombinerCompute => "combiner_compute",
        }
    }
}

/// One point of a cost curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub sweep_var: String,
    pub sweep_value: usize,
    pub metric: CostMetric,
    /// Decoding architecture or combining scheme name.
    pub series: String,
    pub cost: f64,
}

/// Evaluates every cost row at each sweep value.
///
/// `strong_count` is the `L_S` used for combining costs unless the sweep
/// varies it; it is clipped to `L_p` per point.
pub fn cost_sweep(
    base: &ScenarioConfig,
    sweep: CostSweep,
    values: &[usize],
    strong_count: usize,
    lu: LuMeaning,
) -> Result<Vec<CostRow>> {
    if values.is_empty() {
        return Err(Error::config(
            "values",
            "cost sweep needs at least one value",
        ));
    }
    let mut rows = Vec::new();
    for &v in values {
        if v == 0 {
            return Err(Error::config("values", "sweep values must be at least 1"));
        }
        let mut cfg = base.clone();
        let mut ls = strong_count;
        match sweep {
            CostSweep::NumUes => cfg.num_ues = v,
            CostSweep::NumAps => cfg.num_aps = v,
            CostSweep::NumPilots => cfg.num_pilots = v,
            CostSweep::Antennas => cfg.antennas_per_ap = v,
            CostSweep::StrongPilots => ls = v,
        }
        ls = ls.min(cfg.num_pilots);
        let lu_value = lu.value(&cfg);
        for row in DecodingRow::ALL {
            let (fronthaul, weight) = decoding_costs(cfg.num_aps, cfg.num_ues, lu_value, row);
            for (metric, cost) in [
                (CostMetric::Fronthaul, fronthaul),
                (CostMetric::WeightCompute, weight),
            ] {
                rows.push(CostRow {
                    sweep_var: sweep.name().to_string(),
                    sweep_value: v,
                    metric,
                    series: row.name().to_string(),
                    cost,
                });
            }
        }
        for row in CombiningRow::ALL {
            let cost = combining_costs(cfg.antennas_per_ap, cfg.num_pilots, ls, cfg.num_ues, row)?;
            rows.push(CostRow {
                sweep_var: sweep.name().to_string(),
                sweep_value: v,
                metric: CostMetric::CombinerCompute,
                series: row.name().to_string(),
                cost,
            });
        }
    }
    Ok(rows)
}

/// Writes sweep rows as CSV with a header row.
pub fn write_cost_csv<W: Write>(out: &mut W, rows: &[CostRow]) -> std::io::Result<()> {
    writeln!(out, "sweep_var,sweep_value,metric,series,cost")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.sweep_var,
            r.sweep_value,
            r.metric.name(),
            r.series,
            r.cost
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_spot_values() {
        let (fh, w) = decoding_costs(2, 3, 96.5, DecodingRow::Olsfd);
        assert_eq!((fh, w), (203.0, 15.0));
        let (fh, w) = decoding_costs(2, 3, 96.5, DecodingRow::Decentralized);
        assert_eq!((fh, w), (193.0, 15.0));
        assert_eq!(
            combining_costs(8, 7, 2, 10, CombiningRow::Pfzf).unwrap(),
            138.0
        );
        assert_eq!(
            combining_costs(8, 7, 2, 10, CombiningRow::GPfzf).unwrap(),
            114.0
        );
    }

    #[test]
    fn mr_only_generalized_cost() {
        assert_eq!(
            combining_costs(8, 7, 0, 40, CombiningRow::GPfzf).unwrap(),
            56.0
        );
        assert_eq!(
            combining_costs(8, 7, 0, 40, CombiningRow::GPwpfzf).unwrap(),
            56.0
        );
    }

    #[test]
    fn strong_count_above_pilots_rejected() {
        assert!(combining_costs(8, 3, 4, 10, CombiningRow::GPfzf).is_err());
    }

    #[test]
    fn sweep_emits_every_series() {
        let rows = cost_sweep(
            &ScenarioConfig::desk(),
            CostSweep::NumUes,
            &[10, 20],
            2,
            LuMeaning::Symbols,
        )
        .unwrap();
        assert_eq!(rows.len(), 2 * (4 + 4));
        let mut buf = Vec::new();
        write_cost_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), rows.len() + 1);
        assert!(text.starts_with("sweep_var,"));
    }

    #[test]
    fn lu_meanings() {
        let cfg = ScenarioConfig::table_i();
        assert_eq!(LuMeaning::Symbols.value(&cfg), 96.5);
        assert!((LuMeaning::Prelog.value(&cfg) - 0.4825).abs() < 1e-15);
    }
}
