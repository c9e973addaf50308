//! `dmimo` batch driver: experiment runs, self-validation and cost sweeps.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use dmimo::costs::{cost_sweep, write_cost_csv, CostSweep, LuMeaning};
use dmimo::experiments::{validate, ValidateOptions};
use dmimo::{run_experiment, ExperimentSpec, GroupingScheme, Network, SimulationConfig};

#[derive(Parser)]
#[command(
    name = "dmimo",
    version,
    about = "Uplink distributed massive MIMO simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum McReport {
    Ci,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Lu {
    Symbols,
    Prelog,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write CSV/JSON tables.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        experiment: PathBuf,
        /// Output directory; defaults to `out_dir` from the experiment file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the scenario and Monte Carlo seeds.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        drops: Option<usize>,
        /// Replaces the experiment's scheme list with a single scheme.
        #[arg(long)]
        grouping: Option<GroupingScheme>,
        #[arg(long)]
        mc_trials: Option<usize>,
        /// Add standard-error columns to the Monte Carlo table.
        #[arg(long, value_enum)]
        mc_report: Option<McReport>,
        /// Also write the channel statistics of drop 0 to `stats.csv`.
        #[arg(long)]
        dump_stats: bool,
    },
    /// Run the moment catalog, the SINR gate and the gradient gate.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
        /// Write the machine-readable report here instead of stdout.
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        moment_trials: Option<usize>,
    },
    /// Print cost curves as CSV.
    Costs {
        #[arg(long)]
        sweep: CostSweep,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
        /// Base scenario; the full-scale baseline when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        strong_pilots: usize,
        #[arg(long, value_enum, default_value = "symbols")]
        lu: Lu,
    },
}

/// Long-format CSV of the drop-0 statistics, one row per (AP, UE).
fn dump_stats(sim: &SimulationConfig, out: &Path) -> Result<PathBuf> {
    let net = Network::generate(&sim.scenario, 0)?;
    let mut text = String::from("ap,ue,pilot,beta,gamma,c,theta\n");
    for m in 0..net.num_aps() {
        for t in 0..net.num_ues() {
            let i = net.plan.pilot(t);
            text.push_str(&format!(
                "{m},{t},{i},{},{},{},{}\n",
                net.beta(m, t),
                net.gamma(m, t),
                net.stats.c[(m, t)],
                net.stats.theta[(m, i)]
            ));
        }
    }
    let path = out.join("stats.csv");
    fs::write(&path, text)?;
    Ok(path)
}

fn run(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Run {
            scenario,
            experiment,
            out,
            seed,
            drops,
            grouping,
            mc_trials,
            mc_report,
            dump_stats: dump,
        } => {
            let mut sim = SimulationConfig::read(&scenario)?;
            let mut spec = ExperimentSpec::read(&experiment)?;
            if let Some(s) = seed {
                sim.scenario.seed = s;
                sim.mc.seed = s;
            }
            if let Some(d) = drops {
                spec.drops = d;
            }
            if let Some(g) = grouping {
                spec.schemes = vec![g];
            }
            if let Some(n) = mc_trials {
                sim.mc.num_trials = n;
            }
            if mc_report.is_some() {
                sim.mc.report_ci = true;
            }
            let Some(out) = out.or_else(|| spec.out_dir.clone()) else {
                bail!(
                    "no output directory: pass --out or set out_dir in {}",
                    experiment.display()
                );
            };
            let summary = run_experiment(&spec, &sim, &out)
                .with_context(|| format!("experiment {} failed", experiment.display()))?;
            for f in &summary.files {
                println!("{}", f.display());
            }
            if dump {
                println!("{}", dump_stats(&sim, &out)?.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate {
            scenario,
            json,
            moment_trials,
        } => {
            let sim = SimulationConfig::read(&scenario)?;
            let mut opts = ValidateOptions::default();
            if let Some(n) = moment_trials {
                opts.moment_trials = n;
            }
            let report = validate(&sim, &opts)?;
            for c in &report.checks {
                eprintln!(
                    "{} {} error={:.3e} tol={:.1e}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.id,
                    c.error,
                    c.tolerance
                );
            }
            let text = serde_json::to_string_pretty(&report)? + "\n";
            match json {
                Some(path) => {
                    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?
                }
                None => io::stdout().write_all(text.as_bytes())?,
            }
            let failed = report.failures().count();
            if failed > 0 {
                eprintln!("{failed} of {} checks failed", report.checks.len());
                return Ok(ExitCode::from(1));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Costs {
            sweep,
            values,
            scenario,
            strong_pilots,
            lu,
        } => {
            let base = match scenario {
                Some(p) => SimulationConfig::read(&p)?.scenario,
                None => dmimo::ScenarioConfig::table_i(),
            };
            let lu = match lu {
                Lu::Symbols => LuMeaning::Symbols,
                Lu::Prelog => LuMeaning::Prelog,
            };
            let rows = cost_sweep(&base, sweep, &values, strong_pilots, lu)?;
            write_cost_csv(&mut io::stdout().lock(), &rows)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse().command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
