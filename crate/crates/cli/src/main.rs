//! `sgbh`: simulations, convergence experiments and rate-function solves from a TOML config.
//!
//! Exit codes: 0 pass, 1 scientific failure, 2 usage or config error, 3 numerical abort.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{ExperimentKind, SolverKind, Verdict};
use config::RunConfig;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "sgbh", version, about = "Stochastic generalized Burgers-Huxley toolkit")]
struct Cli {
    /// TOML run configuration; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `workers` (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Overrides `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate one path and write trajectory.bin, norms.csv and config.toml.
    Simulate {
        #[arg(long, value_enum, default_value = "spde")]
        solver: SolverKind,
        /// Control path for the controlled and skeleton solvers.
        #[arg(long)]
        control: Option<PathBuf>,
    },
    /// Run a Monte Carlo experiment and write JSON and CSV reports.
    Experiment {
        #[arg(value_enum)]
        kind: ExperimentKind,
    },
    /// Minimum-energy cost of reaching a target endpoint.
    Rate {
        /// JSON field or binary trajectory whose endpoint is the target.
        #[arg(long)]
        target: PathBuf,
    },
    /// Cross-check the heat kernel and fit its Gaussian bounds.
    ValidateKernel,
}

fn run(cli: Cli) -> Result<Verdict, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    match cli.command {
        Command::Simulate { solver, control } => commands::simulate(&cfg, solver, control.as_deref()),
        Command::Experiment { kind } => commands::experiment(&cfg, kind),
        Command::Rate { target } => commands::rate(&cfg, &target),
        Command::ValidateKernel => commands::validate_kernel(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(v) => ExitCode::from(v.exit_code()),
        Err(e) => {
            eprintln!("sgbh: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
