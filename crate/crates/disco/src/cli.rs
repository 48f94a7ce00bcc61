//! Argument parsing and exit codes.
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | the command's check failed (toy dominance, gradient check) |
//! | 2 | bad config or usage |
//! | 3 | unreadable or malformed data, file errors |
//! | 4 | numeric failure: divergence, estimator needing more candidates |

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{self, Outcome, Run};
use crate::config::ExperimentConfig;
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(
    name = "disco",
    version,
    about = "Train and evaluate dissimilarity-coefficient networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML experiment config; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "disco-out")]
    pub out: PathBuf,
    /// Overrides the config's master seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DataArg {
    /// CSV dataset; overrides the config's data section.
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cross-loss table of Gaussian fits to a 2-D mixture.
    Toy {
        #[command(flatten)]
        common: Common,
    },
    /// Train a network; writes model.params, history.csv, summary.json.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArg,
        /// Also write per-epoch wall time to timing.csv.
        #[arg(long)]
        timing: bool,
    },
    /// Evaluate a checkpoint; writes metrics.json and metrics.csv.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArg,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Compare backprop gradients with finite differences.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, hide = true)]
        corrupt_gradient: bool,
    },
    /// Train over a seed × L2 grid and keep the best validation ProbLoss.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArg,
    },
}

fn prepare(common: &Common) -> CliResult<Run> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::defaults(0),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Run::new(config, &common.out)
}

fn dispatch(command: &Command) -> CliResult<Outcome> {
    let data = |d: &DataArg| d.data.clone();
    match command {
        Command::Toy { common } => commands::cmd_toy(&prepare(common)?),
        Command::Train {
            common,
            data: d,
            timing,
        } => commands::cmd_train(&prepare(common)?, data(d).as_deref(), *timing),
        Command::Eval {
            common,
            data: d,
            checkpoint,
        } => commands::cmd_eval(&prepare(common)?, checkpoint, data(d).as_deref()),
        Command::Gradcheck {
            common,
            corrupt_gradient,
        } => commands::cmd_gradcheck(&prepare(common)?, *corrupt_gradient),
        Command::Sweep { common, data: d } => {
            commands::cmd_sweep(&prepare(common)?, data(d).as_deref())
        }
    }
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(&cli.command) {
        Ok(Outcome::Passed) => 0,
        Ok(Outcome::CheckFailed(msg)) => {
            eprintln!("check failed: {msg}");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
