use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use latefuse_core::fusion::StreamOrder;
use latefuse_core::Subset;

#[derive(Debug, Parser)]
#[command(name = "latefuse", version, about = "Multi-stream video classification with weighted late fusion")]
pub struct Cli {
    /// Only log warnings and errors; suppress result tables.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic multi-stream dataset from a spec file.
    GenSynth(GenSynthArgs),
    /// Fit an encoder on the training videos and encode every video.
    Encode(EncodeArgs),
    /// Train one-vs-rest linear SVMs on the training videos.
    TrainSvm(TrainSvmArgs),
    /// Score a subset with a trained SVM model.
    Predict(PredictArgs),
    /// Late-fuse several score files.
    Fuse(FuseArgs),
    /// Print top-1/top-3/mAP for score files.
    Eval(EvalArgs),
    /// Run the configured end-to-end pipeline.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SubsetArg {
    Train,
    Validation,
    Test,
}

impl From<SubsetArg> for Subset {
    fn from(s: SubsetArg) -> Subset {
        match s {
            SubsetArg::Train => Subset::Train,
            SubsetArg::Validation => Subset::Validation,
            SubsetArg::Test => Subset::Test,
        }
    }
}

/// `auto` or a comma-separated list of stream names.
pub fn parse_order(s: &str) -> Result<StreamOrder, String> {
    if s == "auto" {
        return Ok(StreamOrder::ByValidationAccuracy);
    }
    let names: Vec<String> = s.split(',').map(|n| n.trim().to_string()).collect();
    if names.iter().any(String::is_empty) {
        return Err(format!("invalid stream order {s:?}"));
    }
    Ok(StreamOrder::Explicit(names))
}

#[derive(Debug, Args)]
pub struct GenSynthArgs {
    /// Synthetic dataset spec (JSON).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the seed in the dataset file.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// Encoder spec (JSON), e.g. `{"recipe": "vlad_k", "pca_out_dim": 64}`.
    #[arg(long, required_unless_present = "model")]
    pub config: Option<PathBuf>,
    /// Reuse a saved encoder descriptor instead of fitting one.
    #[arg(long, conflicts_with = "config")]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "stream")]
    pub name: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainSvmArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Video-level features.
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long = "C", default_value_t = 1.0)]
    pub c: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "stream")]
    pub name: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// SVM descriptor written by `train-svm`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, value_enum, default_value = "validation")]
    pub subset: SubsetArg,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "stream")]
    pub name: String,
    /// Write raw SVM margins instead of softmax-normalized scores.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Score files as `name=path` or `path` (name from the file name);
    /// repeat the flag or separate with commas.
    #[arg(long, required = true, value_delimiter = ',')]
    pub scores: Vec<String>,
    /// `auto` (by validation accuracy) or a comma-separated stream order.
    #[arg(long, default_value = "auto", value_parser = parse_order)]
    pub order: StreamOrder,
    /// Weight of the running fused result relative to the next stream.
    #[arg(long, default_value_t = 2.0)]
    pub ratio: f64,
    /// Apply a saved fusion plan instead of planning from these files.
    #[arg(long, conflicts_with = "order")]
    pub plan: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "fused")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, required = true, value_delimiter = ',')]
    pub scores: Vec<PathBuf>,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Also report top-k accuracy for this k.
    #[arg(long)]
    pub k: Option<usize>,
    /// Write the reports as JSON into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Reuse fitted models and encoded features already in the output directory.
    #[arg(long)]
    pub resume: bool,
    #[arg(long, value_parser = parse_order)]
    pub order: Option<StreamOrder>,
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
}
