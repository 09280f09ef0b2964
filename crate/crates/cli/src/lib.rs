//! Command-line front end: dataset generation, log-signature extraction,
//! training, evaluation and path inspection.

pub mod commands;
pub mod dataset;
pub mod manifest;

use std::fmt;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

use dataset::Task;
use streamsig::datagen::Regime;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

/// Invalid combination of arguments that the parser cannot catch.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Exit status for a failed command.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.chain().any(|e| e.is::<UsageError>()) {
        return EXIT_USAGE;
    }
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<streamsig::Error>())
        .any(streamsig::Error::is_numerical);
    if numerical {
        EXIT_NUMERICAL
    } else {
        EXIT_DATA
    }
}

#[derive(Debug, Parser)]
#[command(name = "streamsig", version, about = "Log-signatures of irregular streams and log-flow models")]
pub struct Cli {
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Gen(GenArgs),
    /// Interval log-signatures of one stream over a partition.
    Logsig(LogsigArgs),
    /// Train a model on a dataset.
    Train(TrainArgs),
    /// Test MSE of checkpoints on datasets.
    Eval(EvalArgs),
    /// Realize a stream as a path, or decode a realized path.
    Inspect(InspectArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Sequential,
    Scan,
}

impl ModeArg {
    pub fn compose(self) -> streamsig::ComposeMode {
        match self {
            ModeArg::Sequential => streamsig::ComposeMode::Sequential,
            ModeArg::Scan => streamsig::ComposeMode::Parallel,
        }
    }

    pub fn forward(self) -> streamsig::slice::ForwardMode {
        match self {
            ModeArg::Sequential => streamsig::slice::ForwardMode::Sequential,
            ModeArg::Scan => streamsig::slice::ForwardMode::Scan,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub task: Task,
    /// Sampling regime (sinusoid).
    #[arg(long)]
    pub regime: Option<Regime>,
    /// Number of query intervals (brownian).
    #[arg(long)]
    pub m: Option<usize>,
    /// Training samples.
    #[arg(long, default_value_t = 512)]
    pub n: usize,
    /// Test samples.
    #[arg(long, default_value_t = 128)]
    pub n_test: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fine steps per grid cell (brownian).
    #[arg(long, default_value_t = streamsig::datagen::DEFAULT_SUBGRID)]
    pub subgrid: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FeatureArgs {
    #[arg(long)]
    pub depth: Option<usize>,
    /// Drop the count coordinates.
    #[arg(long)]
    pub no_counts: bool,
    /// Drop the time channel.
    #[arg(long)]
    pub no_time: bool,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
}

#[derive(Debug, Args)]
pub struct LogsigArgs {
    /// Stream file (JSON Lines).
    #[arg(long)]
    pub stream: PathBuf,
    /// Partition file (JSON array). Defaults to the single interval `[0, T]`.
    #[arg(long)]
    pub partition: Option<PathBuf>,
    #[command(flatten)]
    pub features: FeatureArgs,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Training config JSON; missing fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[command(flatten)]
    pub features: FeatureArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint files (repeatable).
    #[arg(long, required = true)]
    pub checkpoint: Vec<PathBuf>,
    /// Dataset directories (repeatable).
    #[arg(long, required = true)]
    pub data: Vec<PathBuf>,
    /// Evaluate on the training split instead of the test split.
    #[arg(long)]
    pub train_split: bool,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Also write the matrix as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Output JSON file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Stream file to realize.
    #[arg(long, required_unless_present = "decode", conflicts_with = "decode")]
    pub stream: Option<PathBuf>,
    /// Realized path JSON to decode back into a stream.
    #[arg(long)]
    pub decode: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    #[arg(long)]
    pub no_counts: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
