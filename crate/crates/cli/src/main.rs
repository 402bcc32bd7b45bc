//! `fou-sheet`: experiment harness binary.
//!
//! `fou-sheet <kind> --config <path> [--seed N] [--out <path>] [overrides]`
//!
//! Exit codes: 0 success, 1 validation (parse errors included),
//! 2 runtime failure, 3 i/o failure. `FOU_SHEET_WORKERS` caps the
//! worker pool (default: machine parallelism); results do not depend
//! on the worker count.

use clap::{Args, Parser, Subcommand};
use fou_sheet::config::{parse_config, ExperimentConfig, ExperimentKind, Overrides};
use fou_sheet::experiments::run_experiment;
use fou_sheet::report::write_report;
use fou_sheet::CliError;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "fou-sheet",
    version,
    about = "Simulation and estimation experiments for the fractional Ornstein-Uhlenbeck sheet"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample driving sheets and solve the Langevin equation per horizon
    Simulate(RunArgs),
    /// Replicated drift estimates: trace-corrected and pathwise routes
    Estimate(RunArgs),
    /// Median absolute estimator error across growing horizons
    Consistency(RunArgs),
    /// Exact chaos variance under the horizon normalizations
    VarianceScaling(RunArgs),
    /// Normalized expected squared-field mass across horizons
    DenominatorGrowth(RunArgs),
    /// Fourth-moment gap of the estimator's chaos numerator
    NormalityGap(RunArgs),
    /// Monte Carlo estimate of the singular variance-bound integral
    LemmaIntegral(RunArgs),
    /// Cross-validation of the two Bessel evaluation routes
    BesselCheck(RunArgs),
}

impl Command {
    fn split(self) -> (ExperimentKind, RunArgs) {
        match self {
            Command::Simulate(a) => (ExperimentKind::Simulate, a),
            Command::Estimate(a) => (ExperimentKind::Estimate, a),
            Command::Consistency(a) => (ExperimentKind::Consistency, a),
            Command::VarianceScaling(a) => (ExperimentKind::VarianceScaling, a),
            Command::DenominatorGrowth(a) => (ExperimentKind::DenominatorGrowth, a),
            Command::NormalityGap(a) => (ExperimentKind::NormalityGap, a),
            Command::LemmaIntegral(a) => (ExperimentKind::LemmaIntegral, a),
            Command::BesselCheck(a) => (ExperimentKind::BesselCheck, a),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file; omitted keys fall back to defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed (overrides the config file)
    #[arg(long)]
    seed: Option<u64>,
    /// Output stem; writes <stem>.report.toml and <stem>.csv
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    cell_step: Option<f64>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Horizon pair T:S; repeatable, replaces the config list
    #[arg(long = "horizon", value_name = "T:S", value_parser = parse_horizon)]
    horizon: Vec<(f64, f64)>,
    /// Lift the per-axis grid cell caps
    #[arg(long)]
    i_know_this_is_slow: bool,
}

fn parse_horizon(raw: &str) -> Result<(f64, f64), String> {
    let (t, s) = raw
        .split_once(':')
        .ok_or_else(|| format!("expected T:S, got '{raw}'"))?;
    let parse = |part: &str| {
        part.trim()
            .parse::<f64>()
            .map_err(|_| format!("'{part}' is not a number"))
    };
    Ok((parse(t)?, parse(s)?))
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            alpha: self.alpha,
            beta: self.beta,
            theta: self.theta,
            horizons: if self.horizon.is_empty() {
                None
            } else {
                Some(self.horizon.iter().map(|(t, s)| [*t, *s]).collect())
            },
            cell_step: self.cell_step,
            replications: self.replications,
            seed: self.seed,
            output_path: self.out.clone(),
            epsilon: self.epsilon,
            allow_slow: self.i_know_this_is_slow,
        }
    }
}

fn main() {
    let cli = Cli::parse();
    init_worker_pool();
    let (kind, args) = cli.command.split();
    match execute(kind, &args) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}

fn init_worker_pool() {
    if let Ok(raw) = std::env::var("FOU_SHEET_WORKERS") {
        if let Ok(n) = raw.parse::<usize>() {
            if n > 0 {
                // a later second call would fail; the first one wins
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn execute(kind: ExperimentKind, args: &RunArgs) -> Result<(), CliError> {
    let source = match &args.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?,
        None => String::new(),
    };
    let raw = parse_config(&source)?;
    let (cfg, warnings) = ExperimentConfig::resolve(kind, &raw, &args.overrides())?;
    for warning in &warnings {
        eprintln!("warning: {warning}");
    }
    let report = run_experiment(&cfg, &warnings)?;
    let (report_path, csv_path) = write_report(&report, &cfg.output_path)?;
    eprintln!("wall clock: {:.3}s", report.wall_clock.as_secs_f64());
    println!("{report_path}");
    println!("{csv_path}");
    Ok(())
}
