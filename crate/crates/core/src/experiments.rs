//! Batch experiments: drops, schemes and architectures swept over one
//! scenario dimension, written as versioned CSV tables with JSON mirrors.
//!
//! Drops run in parallel and are reduced in drop order, so a rerun with the
//! same spec and seed reproduces every file byte for byte. All schemes and
//! architectures of one drop see the same network.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{KvFile, SimulationConfig};
use crate::costs::{cost_sweep, CostSweep, LuMeaning};
use crate::error::{Error, Result};
use crate::grouping::{gradient_fd_error, group_network, ApView};
use crate::montecarlo::{empirical_terms_multi, moment_catalog, McCase, McConfig};
use crate::network::Network;
use crate::rng::{stream_rng, Stream};
use crate::scenario::ScenarioConfig;
use crate::scheme::{Architecture, Family, GroupingScheme};
use crate::sedecode::ClosedForm;

/// Version tag written into every CSV header comment and JSON mirror.
pub const SCHEMA_VERSION: u32 = 1;

/// Scenario dimension varied by an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sweep {
    NumUes,
    NumPilots,
    Antennas,
    None,
}

impl Sweep {
    pub const ALL: [Sweep; 4] = [
        Sweep::NumUes,
        Sweep::NumPilots,
        Sweep::Antennas,
        Sweep::None,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Sweep::NumUes => "num_ues",
            Sweep::NumPilots => "num_pilots",
            Sweep::Antennas => "antennas",
            Sweep::None => "none",
        }
    }

    /// Current value of the swept dimension in `cfg`.
    pub fn current(self, cfg: &ScenarioConfig) -> usize {
        match self {
            Sweep::NumUes | Sweep::None => cfg.num_ues,
            Sweep::NumPilots => cfg.num_pilots,
            Sweep::Antennas => cfg.antennas_per_ap,
        }
    }

    pub fn apply(self, cfg: &mut ScenarioConfig, value: usize) {
        match self {
            Sweep::NumUes => cfg.num_ues = value,
            Sweep::NumPilots => cfg.num_pilots = value,
            Sweep::Antennas => cfg.antennas_per_ap = value,
            Sweep::None => {}
        }
    }

    fn cost_sweep(self) -> CostSweep {
        match self {
            Sweep::NumUes | Sweep::None => CostSweep::NumUes,
            Sweep::NumPilots => CostSweep::NumPilots,
            Sweep::Antennas => CostSweep::Antennas,
        }
    }
}

impl fmt::Display for Sweep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Sweep {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Sweep::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                format!("unknown sweep `{s}` (expected num_ues|num_pilots|antennas|none)")
            })
    }
}

/// Kind of table written by [`run_experiment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutputKind {
    SumSe,
    PerUserCdf,
    StrongPilotHistogram,
    Costs,
    McValidation,
}

impl OutputKind {
    pub const ALL: [OutputKind; 5] = [
        OutputKind::SumSe,
        OutputKind::PerUserCdf,
        OutputKind::StrongPilotHistogram,
        OutputKind::Costs,
        OutputKind::McValidation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OutputKind::SumSe => "sum_se",
            OutputKind::PerUserCdf => "per_user_cdf",
            OutputKind::StrongPilotHistogram => "strong_pilot_histogram",
            OutputKind::Costs => "costs",
            OutputKind::McValidation => "mc_validation",
        }
    }
}

impl fmt::Display for OutputKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OutputKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        OutputKind::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                format!("unknown output `{s}` (expected sum_se|per_user_cdf|strong_pilot_histogram|costs|mc_validation)")
            })
    }
}

/// A published result family and the run that regenerates it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FigureFamily {
    pub name: &'static str,
    pub output: OutputKind,
    pub sweep: Sweep,
    pub architectures: &'static [Architecture],
}

const LOCAL_AND_OLSFD: &[Architecture] = &[Architecture::Local, Architecture::Olsfd];
const LOCAL_ONLY: &[Architecture] = &[Architecture::Local];

/// Every result family of the evaluation section, in publication order.
pub const FIGURE_FAMILIES: [FigureFamily; 10] = [
    FigureFamily {
        name: "weight_compute_vs_ues",
        output: OutputKind::Costs,
        sweep: Sweep::NumUes,
        architectures: LOCAL_AND_OLSFD,
    },
    FigureFamily {
        name: "fronthaul_vs_ues",
        output: OutputKind::Costs,
        sweep: Sweep::NumUes,
        architectures: LOCAL_AND_OLSFD,
    },
    FigureFamily {
        name: "combiner_compute_vs_ues",
        output: OutputKind::Costs,
        sweep: Sweep::NumUes,
        architectures: LOCAL_ONLY,
    },
    FigureFamily {
        name: "strong_pilot_histogram",
        output: OutputKind::StrongPilotHistogram,
        sweep: Sweep::None,
        architectures: LOCAL_ONLY,
    },
    FigureFamily {
        name: "sum_se_vs_ues",
        output: OutputKind::SumSe,
        sweep: Sweep::NumUes,
        architectures: LOCAL_ONLY,
    },
    FigureFamily {
        name: "sum_se_vs_pilots",
        output: OutputKind::SumSe,
        sweep: Sweep::NumPilots,
        architectures: LOCAL_ONLY,
    },
    FigureFamily {
        name: "sum_se_vs_antennas",
        output: OutputKind::SumSe,
        sweep: Sweep::Antennas,
        architectures: LOCAL_ONLY,
    },
    FigureFamily {
        name: "local_vs_olsfd_vs_ues",
        output: OutputKind::SumSe,
        sweep: Sweep::NumUes,
        architectures: LOCAL_AND_OLSFD,
    },
    FigureFamily {
        name: "local_vs_olsfd_vs_pilots",
        output: OutputKind::SumSe,
        sweep: Sweep::NumPilots,
        architectures: LOCAL_AND_OLSFD,
    },
    FigureFamily {
        name: "per_user_se_cdf",
        output: OutputKind::PerUserCdf,
        sweep: Sweep::None,
        architectures: LOCAL_AND_OLSFD,
    },
];

/// What to run and what to write.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub sweep: Sweep,
    pub sweep_values: Vec<usize>,
    pub schemes: Vec<GroupingScheme>,
    pub architectures: Vec<Architecture>,
    pub drops: usize,
    pub outputs: Vec<OutputKind>,
    /// Used when the caller does not pass an output directory.
    pub out_dir: Option<PathBuf>,
    /// Meaning of `L_u` in the fronthaul formula.
    pub lu: LuMeaning,
    /// Strong-pilot count used by the combining-cost curves.
    pub cost_strong_pilots: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            sweep: Sweep::None,
            sweep_values: Vec::new(),
            schemes: vec![
                GroupingScheme::GPfzf,
                GroupingScheme::GPwpfzf,
                GroupingScheme::ThresholdPfzf,
                GroupingScheme::ThresholdPwpfzf,
            ],
            architectures: vec![Architecture::Local, Architecture::Olsfd],
            drops: 100,
            outputs: vec![OutputKind::SumSe],
            out_dir: None,
            lu: LuMeaning::Symbols,
            cost_strong_pilots: 2,
        }
    }
}

impl ExperimentSpec {
    pub fn read(path: &Path) -> Result<Self> {
        Self::from_kv(&KvFile::read(path)?)
    }

    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        let mut spec = Self::default();
        for e in &kv.entries {
            match e.key.as_str() {
                "sweep" => spec.sweep = kv.value(e)?,
                "values" => spec.sweep_values = kv.list(e)?,
                "schemes" => spec.schemes = kv.list(e)?,
                "architectures" => spec.architectures = kv.list(e)?,
                "drops" => spec.drops = kv.value(e)?,
                "outputs" => spec.outputs = kv.list(e)?,
                "out_dir" => spec.out_dir = Some(PathBuf::from(&e.value)),
                "lu" => {
                    spec.lu = match e.value.as_str() {
                        "symbols" => LuMeaning::Symbols,
                        "prelog" => LuMeaning::Prelog,
                        _ => return Err(kv.error(e, "expected symbols|prelog")),
                    }
                }
                "cost.strong_pilots" => spec.cost_strong_pilots = kv.value(e)?,
                _ => return Err(kv.error(e, "unknown key")),
            }
        }
        spec.validate().map_err(|err| kv.locate(err))?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweep != Sweep::None && self.sweep_values.is_empty() {
            return Err(Error::config("values", "a sweep needs at least one value"));
        }
        if self.sweep_values.contains(&0) {
            return Err(Error::config("values", "sweep values must be at least 1"));
        }
        if self.schemes.is_empty() {
            return Err(Error::config("schemes", "at least one scheme is required"));
        }
        if self.architectures.is_empty() {
            return Err(Error::config(
                "architectures",
                "at least one architecture is required",
            ));
        }
        if self.outputs.is_empty() {
            return Err(Error::config("outputs", "at least one output is required"));
        }
        if self.drops == 0 {
            return Err(Error::config("drops", "must be at least 1"));
        }
        Ok(())
    }

    /// Sweep points; a single point at the base value without a sweep.
    pub fn points(&self, base: &ScenarioConfig) -> Vec<usize> {
        if self.sweep == Sweep::None {
            vec![self.sweep.current(base)]
        } else {
            self.sweep_values.clone()
        }
    }
}

/// One table cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Real(v) => write!(f, "{v}"),
            Cell::Text(v) => f.write_str(v),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// Column-named rows shared by the CSV and JSON writers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub kind: OutputKind,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(kind: OutputKind, columns: &[&str]) -> Self {
        Self {
            kind,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn schema(&self) -> String {
        format!("dmimo/{}/v{SCHEMA_VERSION}", self.kind.name())
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "# schema: {}", self.schema())?;
        writeln!(out, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "schema": self.schema(),
            "columns": self.columns,
            "rows": self.rows,
        })
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Quantile levels written to the per-user CDF table.
pub const CDF_LEVELS: [f64; 7] = [0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95];

#[derive(Debug, Clone)]
struct ArchOutcome {
    sum_se: f64,
    ue_se: Vec<f64>,
}

#[derive(Debug, Clone)]
struct SchemeOutcome {
    strong_counts: Vec<usize>,
    archs: Vec<ArchOutcome>,
}

fn run_drop(
    cfg: &ScenarioConfig,
    sim: &SimulationConfig,
    spec: &ExperimentSpec,
    drop: u64,
) -> Result<Vec<SchemeOutcome>> {
    let net = Network::generate(cfg, drop)?;
    spec.schemes
        .iter()
        .map(|&scheme| {
            let grouping = group_network(&net, scheme, &sim.grouping)?;
            let cf = ClosedForm::new(&net, &grouping, scheme.family());
            let archs = spec
                .architectures
                .iter()
                .map(|&arch| {
                    let report = cf.report(&cf.weights(arch)?);
                    Ok(ArchOutcome {
                        sum_se: report.sum_se(),
                        ue_se: report.se(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SchemeOutcome {
                strong_counts: grouping.strong_count.clone(),
                archs,
            })
        })
        .collect()
}

/// Per-point statistics gathered from every drop.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub sweep_value: usize,
    /// `[scheme][arch]` sum SE of each drop.
    pub sum_se: Vec<Vec<Vec<f64>>>,
    /// `[scheme][arch]` pooled per-user SE of every drop.
    pub ue_se: Vec<Vec<Vec<f64>>>,
    /// `[scheme][drop]` strong-pilot count of every AP.
    pub strong_counts: Vec<Vec<Vec<usize>>>,
}

/// Runs every drop of one sweep point.
pub fn run_point(
    spec: &ExperimentSpec,
    sim: &SimulationConfig,
    value: usize,
) -> Result<PointResult> {
    let mut cfg = sim.scenario.clone();
    spec.sweep.apply(&mut cfg, value);
    cfg.validate()?;
    let drops: Vec<Vec<SchemeOutcome>> = (0..spec.drops as u64)
        .into_par_iter()
        .map(|d| run_drop(&cfg, sim, spec, d))
        .collect::<Result<_>>()?;
    let ns = spec.schemes.len();
    let na = spec.architectures.len();
    let mut out = PointResult {
        sweep_value: value,
        sum_se: vec![vec![Vec::with_capacity(spec.drops); na]; ns],
        ue_se: vec![vec![Vec::new(); na]; ns],
        strong_counts: vec![Vec::with_capacity(spec.drops); ns],
    };
    for drop in drops {
        for (s, so) in drop.into_iter().enumerate() {
            out.strong_counts[s].push(so.strong_counts);
            for (a, ao) in so.archs.into_iter().enumerate() {
                out.sum_se[s][a].push(ao.sum_se);
                out.ue_se[s][a].extend(ao.ue_se);
            }
        }
    }
    Ok(out)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn sum_se_table(spec: &ExperimentSpec, points: &[PointResult]) -> Table {
    let mut t = Table::new(
        OutputKind::SumSe,
        &[
            "sweep_var",
            "sweep_value",
            "scheme",
            "architecture",
            "mean_sum_se",
            "std_sum_se",
            "drops",
        ],
    );
    for p in points {
        for (s, scheme) in spec.schemes.iter().enumerate() {
            for (a, arch) in spec.architectures.iter().enumerate() {
                let (mean, std) = mean_std(&p.sum_se[s][a]);
                t.push(vec![
                    spec.sweep.name().into(),
                    p.sweep_value.into(),
                    scheme.name().into(),
                    arch.name().into(),
                    mean.into(),
                    std.into(),
                    p.sum_se[s][a].len().into(),
                ]);
            }
        }
    }
    t
}

fn cdf_table(spec: &ExperimentSpec, points: &[PointResult]) -> Table {
    let mut cols = vec![
        "sweep_var",
        "sweep_value",
        "scheme",
        "architecture",
        "samples",
    ];
    let names: Vec<String> = CDF_LEVELS
        .iter()
        .map(|p| format!("p{:02}", (p * 100.0).round() as u32))
        .collect();
    cols.extend(names.iter().map(String::as_str));
    cols.push("se_90_likely");
    let mut t = Table::new(OutputKind::PerUserCdf, &cols);
    for p in points {
        for (s, scheme) in spec.schemes.iter().enumerate() {
            for (a, arch) in spec.architectures.iter().enumerate() {
                let mut se = p.ue_se[s][a].clone();
                se.sort_by(f64::total_cmp);
                let mut row: Vec<Cell> = vec![
                    spec.sweep.name().into(),
                    p.sweep_value.into(),
                    scheme.name().into(),
                    arch.name().into(),
                    se.len().into(),
                ];
                row.extend(CDF_LEVELS.iter().map(|&l| Cell::Real(quantile(&se, l))));
                row.push(quantile(&se, 0.1).into());
                t.push(row);
            }
        }
    }
    t
}

fn histogram_table(spec: &ExperimentSpec, points: &[PointResult]) -> Table {
    let mut t = Table::new(
        OutputKind::StrongPilotHistogram,
        &[
            "sweep_var",
            "sweep_value",
            "scheme",
            "strong_pilots",
            "ap_count",
            "drops_with_value",
            "drops",
        ],
    );
    for p in points {
        for (s, scheme) in spec.schemes.iter().enumerate() {
            let per_drop = &p.strong_counts[s];
            let max = per_drop.iter().flatten().copied().max().unwrap_or(0);
            for ls in 0..=max {
                let ap_count: usize = per_drop
                    .iter()
                    .map(|d| d.iter().filter(|&&c| c == ls).count())
                    .sum();
                let drops_with = per_drop.iter().filter(|d| d.contains(&ls)).count();
                t.push(vec![
                    spec.sweep.name().into(),
                    p.sweep_value.into(),
                    scheme.name().into(),
                    ls.into(),
                    ap_count.into(),
                    drops_with.into(),
                    per_drop.len().into(),
                ]);
            }
        }
    }
    t
}

fn cost_table(spec: &ExperimentSpec, base: &ScenarioConfig, values: &[usize]) -> Result<Table> {
    let rows = cost_sweep(
        base,
        spec.sweep.cost_sweep(),
        values,
        spec.cost_strong_pilots,
        spec.lu,
    )?;
    let mut t = Table::new(
        OutputKind::Costs,
        &["sweep_var", "sweep_value", "metric", "series", "cost"],
    );
    for r in rows {
        t.push(vec![
            r.sweep_var.as_str().into(),
            r.sweep_value.into(),
            r.metric.name().into(),
            r.series.as_str().into(),
            r.cost.into(),
        ]);
    }
    Ok(t)
}

/// Closed-form against empirical SINR on drop 0 of every sweep point.
fn mc_table(spec: &ExperimentSpec, sim: &SimulationConfig, values: &[usize]) -> Result<Table> {
    let mut cols = vec![
        "sweep_var",
        "sweep_value",
        "scheme",
        "architecture",
        "ue",
        "closed_form_sinr",
        "empirical_sinr",
        "rel_error",
        "ds",
        "bu",
        "pc",
        "ui",
        "gn",
    ];
    if sim.mc.report_ci {
        cols.extend([
            "ds_stderr",
            "bu_stderr",
            "pc_stderr",
            "ui_stderr",
            "gn_stderr",
        ]);
    }
    let mut t = Table::new(OutputKind::McValidation, &cols);
    for &value in values {
        let mut cfg = sim.scenario.clone();
        spec.sweep.apply(&mut cfg, value);
        let net = Network::generate(&cfg, 0)?;
        for &scheme in &spec.schemes {
            let grouping = group_network(&net, scheme, &sim.grouping)?;
            let cf = ClosedForm::new(&net, &grouping, scheme.family());
            let weights = spec
                .architectures
                .iter()
                .map(|&a| cf.weights(a))
                .collect::<Result<Vec<_>>>()?;
            let cases: Vec<McCase> = weights
                .iter()
                .map(|w| McCase {
                    grouping: &grouping,
                    family: scheme.family(),
                    weights: w,
                })
                .collect();
            let reports = empirical_terms_multi(&net, &cases, &sim.mc)?;
            for ((arch, w), rep) in spec.architectures.iter().zip(&weights).zip(&reports) {
                for est in &rep.ues {
                    let closed = cf.ue_sinr(w, est.ue).sinr;
                    let mut row: Vec<Cell> = vec![
                        spec.sweep.name().into(),
                        value.into(),
                        scheme.name().into(),
                        arch.name().into(),
                        est.ue.into(),
                        closed.into(),
                        est.sinr.into(),
                        ((est.sinr - closed).abs() / closed).into(),
                    ];
                    let tm = &est.terms;
                    row.extend([tm.ds, tm.bu, tm.pc, tm.ui, tm.gn].map(Cell::Real));
                    if sim.mc.report_ci {
                        let se = &est.stderr;
                        row.extend([se.ds, se.bu, se.pc, se.ui, se.gn].map(Cell::Real));
                    }
                    t.push(row);
                }
            }
        }
    }
    Ok(t)
}

/// Files written by a successful run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub tables: Vec<Table>,
}

/// Computes every requested table in memory.
pub fn build_tables(spec: &ExperimentSpec, sim: &SimulationConfig) -> Result<Vec<Table>> {
    spec.validate()?;
    sim.validate()?;
    let values = spec.points(&sim.scenario);
    let needs_drops = spec.outputs.iter().any(|o| {
        matches!(
            o,
            OutputKind::SumSe | OutputKind::PerUserCdf | OutputKind::StrongPilotHistogram
        )
    });
    let points = if needs_drops {
        values
            .iter()
            .map(|&v| {
                log::info!("{} = {v}: {} drops", spec.sweep, spec.drops);
                run_point(spec, sim, v)
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let mut tables = Vec::new();
    for &kind in &spec.outputs {
        tables.push(match kind {
            OutputKind::SumSe => sum_se_table(spec, &points),
            OutputKind::PerUserCdf => cdf_table(spec, &points),
            OutputKind::StrongPilotHistogram => histogram_table(spec, &points),
            OutputKind::Costs => cost_table(spec, &sim.scenario, &values)?,
            OutputKind::McValidation => mc_table(spec, sim, &values)?,
        });
    }
    Ok(tables)
}

fn write_tables(tables: &[Table], out_dir: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    for table in tables {
        let csv = out_dir.join(format!("{}.csv", table.kind.name()));
        let mut buf = Vec::new();
        table.write_csv(&mut buf)?;
        written.push(csv.clone());
        fs::write(&csv, buf)?;
        let json = out_dir.join(format!("{}.json", table.kind.name()));
        let mut text = serde_json::to_string_pretty(&table.to_json())?;
        text.push('\n');
        written.push(json.clone());
        fs::write(&json, text)?;
    }
    Ok(())
}

/// Runs the experiment and writes `<kind>.csv` plus `<kind>.json` per output.
///
/// Nothing is written until every table is computed; if writing fails, files
/// created by this run are removed again, as is `out_dir` if the run created it.
pub fn run_experiment(
    spec: &ExperimentSpec,
    sim: &SimulationConfig,
    out_dir: &Path,
) -> Result<RunSummary> {
    let tables = build_tables(spec, sim)?;
    let created_dir = !out_dir.exists();
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    if let Err(err) = write_tables(&tables, out_dir, &mut written) {
        for f in &written {
            let _ = fs::remove_file(f);
        }
        if created_dir {
            let _ = fs::remove_dir(out_dir);
        }
        return Err(err);
    }
    Ok(RunSummary {
        files: written,
        tables,
    })
}

/// One pass/fail line of [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub id: String,
    pub estimate: f64,
    pub target: f64,
    /// Relative error compared against `tolerance`.
    pub error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckOutcome>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// Budgets and gates of [`validate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidateOptions {
    pub moment_trials: usize,
    pub sinr_tolerance: f64,
    pub gradient_points: usize,
    pub gradient_tolerance: f64,
    pub gradient_step: f64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            moment_trials: 10_000,
            sinr_tolerance: 0.05,
            gradient_points: 20,
            gradient_tolerance: 1e-5,
            gradient_step: 1e-6,
        }
    }
}

/// Random interior points of `(0, 1)^L_p` with a random penalty weight.
fn gradient_probes(
    net: &Network,
    family: Family,
    points: usize,
    seed: u64,
) -> Vec<(usize, Vec<f64>, f64)> {
    let tag = match family {
        Family::Pfzf => 0,
        Family::Pwpfzf => 1,
    };
    let mut rng = stream_rng(seed, Stream::Validation, tag);
    (0..points)
        .map(|_| {
            let m = rng.random_range(0..net.num_aps());
            let delta = (0..net.num_pilots())
                .map(|_| rng.random_range(0.05..0.95))
                .collect();
            let chi = 10f64.powf(rng.random_range(-2.0..1.0));
            (m, delta, chi)
        })
        .collect()
}

/// Worst finite-difference gap of the relaxed gradient over random probes.
pub fn gradient_check(
    net: &Network,
    family: Family,
    sim: &SimulationConfig,
    opts: &ValidateOptions,
) -> CheckOutcome {
    let pga = &sim.grouping.pga;
    let worst = gradient_probes(net, family, opts.gradient_points, sim.scenario.seed)
        .into_iter()
        .map(|(m, delta, chi)| {
            gradient_fd_error(
                &ApView::new(net, m),
                &delta,
                family,
                chi,
                pga.lambda1,
                pga.lambda2,
                opts.gradient_step,
            )
        })
        .fold(0.0, f64::max);
    let id = match family {
        Family::Pfzf => "gradient:gpfzf",
        Family::Pwpfzf => "gradient:gpwpfzf",
    };
    CheckOutcome {
        id: id.into(),
        estimate: worst,
        target: 0.0,
        error: worst,
        tolerance: opts.gradient_tolerance,
        pass: worst <= opts.gradient_tolerance,
    }
}

/// Worst closed-form versus empirical SINR gap per (scheme, architecture) on drop 0.
pub fn sinr_checks(
    net: &Network,
    sim: &SimulationConfig,
    opts: &ValidateOptions,
) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    for scheme in [GroupingScheme::GPfzf, GroupingScheme::GPwpfzf] {
        let grouping = group_network(net, scheme, &sim.grouping)?;
        let cf = ClosedForm::new(net, &grouping, scheme.family());
        let weights = Architecture::ALL
            .iter()
            .map(|&a| cf.weights(a))
            .collect::<Result<Vec<_>>>()?;
        let cases: Vec<McCase> = weights
            .iter()
            .map(|w| McCase {
                grouping: &grouping,
                family: scheme.family(),
                weights: w,
            })
            .collect();
        let reports = empirical_terms_multi(net, &cases, &sim.mc)?;
        for ((arch, w), rep) in Architecture::ALL.iter().zip(&weights).zip(&reports) {
            let (mut worst, mut est, mut target) = (0.0f64, f64::NAN, f64::NAN);
            for e in &rep.ues {
                let closed = cf.ue_sinr(w, e.ue).sinr;
                let rel = (e.sinr - closed).abs() / closed;
                if rel >= worst {
                    (worst, est, target) = (rel, e.sinr, closed);
                }
            }
            out.push(CheckOutcome {
                id: format!("sinr:{scheme}:{arch}"),
                estimate: est,
                target,
                error: worst,
                tolerance: opts.sinr_tolerance,
                pass: worst <= opts.sinr_tolerance,
            });
        }
    }
    Ok(out)
}

/// Moment catalog, SINR gate and gradient gate for one scenario.
pub fn validate(sim: &SimulationConfig, opts: &ValidateOptions) -> Result<ValidationReport> {
    sim.validate()?;
    let mut checks = Vec::new();
    let moment_mc = McConfig {
        num_trials: opts.moment_trials,
        ..sim.mc
    };
    for m in moment_catalog(sim.scenario.antennas_per_ap, &moment_mc)? {
        if !m.applicable {
            continue;
        }
        checks.push(CheckOutcome {
            id: format!(
                "moment:{}:A{}:LS{}",
                m.check.id(),
                m.antennas,
                m.strong_count
            ),
            estimate: m.estimate,
            target: m.target,
            error: m.rel_error,
            tolerance: m.tolerance,
            pass: m.pass,
        });
    }
    let net = Network::generate(&sim.scenario, 0)?;
    checks.extend(sinr_checks(&net, sim, opts)?);
    for family in [Family::Pfzf, Family::Pwpfzf] {
        checks.push(gradient_check(&net, family, sim, opts));
    }
    Ok(ValidationReport { checks })
}
