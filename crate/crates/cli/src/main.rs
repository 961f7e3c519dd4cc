//! `gustcast`: synthesize data, tune, train, and evaluate the forecasters.
//!
//! Every command is driven by a `key = value` config file plus a few flags
//! that override single keys. Outputs are plain CSV and checkpoint files,
//! deterministic given the same inputs. Exit codes: 0 success, 1 runtime
//! or I/O failure, 2 usage or configuration error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Ctx, Failure};

#[derive(Parser)]
#[command(name = "gustcast", version, about = "Short-term wind power forecasting pipeline")]
struct Cli {
    /// Run configuration file (`key = value`, `#` comments).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the seed key the command uses (synth.seed, train.seed, or ga.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `out.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic power + weather dataset as CSV.
    Synth {
        /// Number of 5-minute power points (multiple of 12); overrides `synth.points`.
        #[arg(long)]
        points: Option<usize>,
    },
    /// Train replicate models and evaluate them against persistence.
    Train,
    /// Genetic hyperparameter search; writes the winner as a config fragment.
    Hyperopt,
    /// Evaluate a saved checkpoint over (part of) the held-out test view.
    Eval {
        /// Checkpoint file written by `train`.
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        /// Directory with power.csv + weather.csv (as written by `synth`);
        /// overrides the config data source.
        #[arg(long, value_name = "DIR")]
        data: Option<PathBuf>,
        /// Absolute row range `start..end` inside the test view; defaults to
        /// the whole view.
        #[arg(long, value_name = "RANGE")]
        range: Option<String>,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = commands::load_config(cli.config.as_deref())?;
    let ctx = Ctx { cfg, seed: cli.seed, out: cli.out, quiet: cli.quiet };
    match cli.command {
        Command::Synth { points } => commands::cmd_synth(&ctx, points),
        Command::Train => commands::cmd_train(&ctx),
        Command::Hyperopt => commands::cmd_hyperopt(&ctx),
        Command::Eval { checkpoint, data, range } => {
            commands::cmd_eval(&ctx, &checkpoint, data.as_deref(), range.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
