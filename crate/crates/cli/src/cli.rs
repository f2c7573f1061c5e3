//! Command-line arguments.

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "headpose",
    version,
    about = "Face-swap detection from inconsistent head poses"
)]
pub struct Cli {
    /// Run configuration (JSON); defaults apply to every missing field.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configuration seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate whole-face and central-region poses for every record.
    Pose(PoseArgs),
    /// Extract pose-difference feature vectors.
    Features(FeaturesArgs),
    /// Train a classifier on the train split of a manifest.
    Train(TrainArgs),
    /// Score a split of a manifest and write a report directory.
    Eval(EvalArgs),
    /// Write a synthetic dataset and its manifest.
    Synth(SynthArgs),
    /// Render a saved evaluation report.
    Report(ReportArgs),
}

/// Where landmark records come from.
#[derive(Debug, Args)]
pub struct InputArgs {
    /// Landmark JSON-lines files.
    pub inputs: Vec<PathBuf>,
    /// Read every entry of a dataset manifest instead.
    #[arg(long, conflicts_with = "inputs")]
    pub manifest: Option<PathBuf>,
    /// Canonical face model (JSON); the bundled mean face by default.
    #[arg(long)]
    pub face_model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PoseArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Output JSON-lines file; stdout by default.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Feature variant (V, R_VEC, R_MAT, V_T, RVEC_T, RMAT_T).
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Where to write the model; falls back to `model_path` in the configuration.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub face_model: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Falls back to `model_path` in the configuration.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Report directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    #[arg(long)]
    pub face_model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Dataset directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub face_model: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// A `report.json` written by `eval`.
    pub report: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    pub format: ReportFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
