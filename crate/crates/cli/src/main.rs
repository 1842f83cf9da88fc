//! `songrec`: prepare listening logs, train, evaluate and sweep next-song
//! recommenders. Artifacts go to files; progress goes to standard error.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::{cmd_evaluate, cmd_prepare, cmd_sweep, cmd_train, parse_orders, Run};
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "songrec", version, about = "Next-song recommendation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON experiment configuration; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a configuration value by dotted path, e.g.
    /// `--set params.neural.j=3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Threads for parallel evaluation and WMF solves.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value = "info")]
    log_level: log::LevelFilter,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a raw log and write a prepared dataset directory.
    Prepare(Common),
    /// Train the configured model on a prepared dataset.
    Train(Common),
    /// Evaluate a checkpoint on the prepared test split.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train and evaluate one fresh model per Markov order.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Orders to run, e.g. `1-5` or `1,3,5`.
        #[arg(long, default_value = "1-5")]
        orders: String,
    },
}

fn setup(common: &Common) -> CliResult<Run> {
    env_logger::Builder::new()
        .filter_level(common.log_level)
        .format_timestamp_secs()
        .target(env_logger::Target::Stderr)
        .init();
    if common.workers == 0 {
        return Err(CliError::msg("--workers must be >= 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(common.workers)
        .build_global()
        .map_err(|e| CliError::msg(e.to_string()))?;
    let mut config = ExperimentConfig::load(common.config.as_deref(), &common.overrides)?;
    if let Some(out) = &common.out {
        config.out_dir = out.clone();
    }
    Ok(Run { out: config.out_dir.clone(), config, workers: common.workers })
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Prepare(c) => cmd_prepare(&setup(&c)?),
        Command::Train(c) => cmd_train(&setup(&c)?),
        Command::Evaluate { common, checkpoint } => cmd_evaluate(&setup(&common)?, &checkpoint),
        Command::Sweep { common, orders } => {
            let orders = parse_orders(&orders)?;
            cmd_sweep(&setup(&common)?, &orders)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
