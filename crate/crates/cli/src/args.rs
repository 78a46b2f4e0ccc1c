//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::split::SplitChoice;

#[derive(Parser)]
#[command(
    name = "throughcast",
    version,
    about = "Throughput stability analysis, forecasting, and playback simulation over session traces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a synthetic trace corpus from a state model.
    Synth(SynthArgs),
    /// Summarize per-session stability and cross-session structure.
    Analyze(AnalyzeArgs),
    /// Fit a forecasting model on one side of the session split.
    Train(TrainArgs),
    /// Replay sessions through a fitted model and record every prediction.
    Predict(PredictArgs),
    /// Compare predictors by aggregated relative error.
    Eval(EvalArgs),
    /// Score adaptation policies in the playback simulator.
    Simulate(SimulateArgs),
    /// Summarize the artifacts a previous command produced.
    Report(ReportArgs),
}

/// Which family of forecasting model `train` fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Hmm,
    Ar,
    Arma,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Number of sessions to generate.
    #[arg(long, default_value_t = 120)]
    pub sessions: usize,
    /// Epochs per session.
    #[arg(long, default_value_t = 40)]
    pub length: usize,
    /// Seed for the generator.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// State-model JSON to sample from (default: a built-in reference
    /// mixture).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Pipeline config JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for traces.csv and the run manifest.
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct AnalyzeArgs {
    /// Trace CSV to analyze.
    #[arg(long)]
    pub trace: PathBuf,
    /// Pipeline config JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for artifacts and the run manifest.
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Trace CSV to fit on.
    #[arg(long)]
    pub trace: PathBuf,
    /// Model family to fit.
    #[arg(long, value_enum, default_value = "hmm")]
    pub kind: ModelKind,
    /// Side of the session split to fit on.
    #[arg(long, value_enum, default_value = "train")]
    pub split: SplitChoice,
    /// Overrides both the split seed and the training seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Pipeline config JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for model.json and the run manifest.
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct PredictArgs {
    /// Trace CSV to predict on.
    #[arg(long)]
    pub trace: PathBuf,
    /// Fitted model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Side of the session split to predict on.
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitChoice,
    /// Seed for the session split.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Pipeline config JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for predictions.csv and the run manifest.
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Trace CSV to evaluate on.
    #[arg(long)]
    pub trace: PathBuf,
    /// Fitted model JSON files to include beside the history baselines
    /// (repeatable).
    #[arg(long = "model")]
    pub models: Vec<PathBuf>,
    /// Also sweep state-model sizes (fits on the train split, scores on the
    /// test split).
    #[arg(long)]
    pub sweep: bool,
    /// Side of the session split to score predictors on.
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitChoice,
    /// Overrides both the split seed and the sweep's training seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Pipeline config JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for errors.csv (and sweep.csv) plus the run manifest.
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Trace CSV to simulate.
    #[arg(long)]
    pub trace: PathBuf,
    /// Fitted model JSON to drive an extra planner policy.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Side of the session split to simulate.
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitChoice,
    /// Seed for the session split.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Pipeline config JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for qoe.csv and the run manifest.
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Directory holding artifacts from previous commands.
    #[arg(long, default_value = "out")]
    pub dir: PathBuf,
}
