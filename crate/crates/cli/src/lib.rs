//! The `mpm` command-line tool: simulate scenarios, track objects with or
//! without the motion prior, train the fusion scalars, and score predictions.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
//! failure. Log verbosity comes from the `MPM_LOG` environment variable
//! (`error`, `warn`, `info`, `debug`).

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mpm_core::{Branch, Error, ErrorKind};

mod commands;
pub mod layout;
pub mod report;

pub use commands::run;

#[derive(Debug, Parser)]
#[command(name = "mpm", version, about = "Motion-prior tracking and logit fusion toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the default configuration as JSON.
    Defaults(DefaultsArgs),
    /// Render a scenario: ground-truth labels and per-branch logits.
    Simulate(SimulateArgs),
    /// Track every sequence of a data directory and score the result.
    Track(TrackArgs),
    /// Train the 16 fusion scalars on a data directory.
    FuseTrain(FuseTrainArgs),
    /// Score predicted label files against ground truth.
    Evaluate(EvaluateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SampleScenario {
    /// Two objects, 30 frames, no noise.
    TwoObjects,
    /// One slow object hidden for five frames.
    Occlusion,
    /// Two look-alike objects on crossing paths.
    Crossing,
    /// One noise-free branch (M+) among three noisy ones.
    Oracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct DefaultsArgs {
    /// Include a sample scenario section.
    #[arg(long, value_enum)]
    pub scenario: Option<SampleScenario>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Branches to render (default: all four).
    #[arg(long, value_delimiter = ',', value_parser = parse_branch)]
    pub branches: Vec<Branch>,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory of `simulate`, or any directory with the same layout.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub mpm: Option<Toggle>,
    /// Branches to track (default: `track.branch` from the config).
    #[arg(long, value_delimiter = ',', value_parser = parse_branch)]
    pub branches: Vec<Branch>,
    /// Boundary tolerance in pixels.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FuseTrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Start from a saved parameter file instead of `fusion.init`.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predicted `.lbl` file or directory of them.
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth `.lbl` file or directory of them.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub tolerance: Option<f64>,
}

fn parse_branch(s: &str) -> std::result::Result<Branch, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

pub fn exit_code(err: &Error) -> u8 {
    match err.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numerical => 4,
    }
}

pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("MPM_LOG", "warn");
    let _ = env_logger::Builder::from_env(env)
        .format_timestamp(None)
        .try_init();
}
