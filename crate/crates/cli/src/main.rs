use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use osiris_cli::commands::{self, Command};
use osiris_cli::experiments::workers_from_env;
use osiris_cli::{EnvChoice, ExperimentConfig, Overrides, Result};

/// Seeded off-policy evaluation experiments on tabular Gridworlds.
///
/// The worker count is read from OSIRIS_WORKERS (default: all cores).
/// Exit codes: 0 success, 1 invalid input, 2 failed checks.
#[derive(Debug, Parser)]
#[command(name = "osiris", version = osiris_cli::output::version())]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Mean, std and RMSE of every estimator over independent trials.
    Bench(Common),
    /// OSIRWIS estimates across batch sizes and significance levels.
    Consistency {
        #[command(flatten)]
        common: Common,
        /// Batch sizes to sweep (comma separated).
        #[arg(long, value_delimiter = ',')]
        batch_sizes: Option<Vec<usize>>,
    },
    /// Per-state frequency of estimated relevance.
    RelevanceMap(Common),
    /// Monte Carlo checks of the estimator identities.
    Diagnostics {
        #[command(flatten)]
        common: Common,
        /// Only the trivial keep-everything equalities, with few draws.
        #[arg(long)]
        smoke: bool,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Significance levels (comma separated or repeated).
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    /// dilly_dallying, express or file:<path>.
    #[arg(long)]
    env: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write per-trial wall times to this file.
    #[arg(long)]
    timings: Option<PathBuf>,
}

fn execute(cli: Cli) -> Result<()> {
    let (command, common, batch_sizes) = match cli.command {
        Cmd::Bench(c) => (Command::Bench, c, None),
        Cmd::Consistency { common, batch_sizes } => (Command::Consistency, common, batch_sizes),
        Cmd::RelevanceMap(c) => (Command::RelevanceMap, c, None),
        Cmd::Diagnostics { common, smoke } => (Command::Diagnostics { smoke }, common, None),
    };
    let base = match &common.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    let cfg = base.apply(Overrides {
        seed: common.seed,
        trials: common.trials,
        batch_size: common.batch_size,
        alphas: common.alpha,
        env: common.env.as_deref().map(str::parse::<EnvChoice>).transpose()?,
        out: common.out,
        batch_sizes,
    });
    let workers = workers_from_env()?;
    let outcome = commands::run(command, &cfg, workers);
    if let Ok(out) = &outcome {
        for f in &out.files {
            println!("{}", f.display());
        }
        if let Some(path) = &common.timings {
            commands::write_timings(path, &out.wall_times)?;
        }
    }
    outcome.map(|_| ())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
