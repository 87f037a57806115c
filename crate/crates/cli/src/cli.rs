use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "camo",
    version,
    about = "Class-aware minority-optimized ensemble aggregation"
)]
pub struct Cli {
    /// Process records on one thread. Output is identical either way.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Aggregate predictions into one decision per instance.
    Aggregate(AggregateArgs),
    /// Score strategies against gold labels and print the comparison table.
    Evaluate(EvaluateArgs),
    /// Evaluate CAMO over a range of values for one parameter.
    Sweep(SweepArgs),
    /// Generate a synthetic prediction file.
    Synth(SynthArgs),
    /// Fit the stacked meta-ensemble and save it for reuse.
    FitMeta(FitMetaArgs),
    /// Re-run a recorded command and check its outputs are bit-identical.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct AggregateArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "camo")]
    pub strategy: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    /// Comma-separated strategy ids; defaults to the config's list.
    #[arg(long)]
    pub strategies: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    /// Parameter name, optionally `name.class` for a per-class override.
    #[arg(long)]
    pub param: String,
    /// `v1,v2,...` or `start..end:step`.
    #[arg(long, allow_hyphen_values = true)]
    pub values: String,
    #[arg(long, default_value = "macro_f1")]
    pub metric: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct FitMetaArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}
