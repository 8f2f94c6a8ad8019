use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::Dims;

#[derive(Debug, Parser)]
#[command(name = "memaudit", version, about = "Audit generative models for memorized training samples")]
pub struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker thread cap. Results do not depend on it.
    #[arg(long, global = true, env = "MEMAUDIT_THREADS")]
    pub threads: Option<usize>,
    /// Where to write the run manifest (default: beside the primary output).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a planted-copy benchmark corpus.
    SynthCorpus(SynthCorpusArgs),
    /// Train the contrastive encoder on training images.
    TrainEncoder(TrainEncoderArgs),
    /// Pool images into features and optionally map them through an encoder.
    Embed(EmbedArgs),
    /// Calibrate a threshold and flag memorized samples and copies.
    Audit(AuditArgs),
    /// Memorization counts across generator checkpoints.
    Curve(CurveArgs),
    /// ROC sweep of the calibration percentile against human labels.
    Roc(RocArgs),
    /// Human-readable summary of audit results and quality metrics.
    Report(ReportArgs),
    /// Serve copy candidates for manual labeling.
    Review(ReviewArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SynthCorpus(_) => "synth-corpus",
            Command::TrainEncoder(_) => "train-encoder",
            Command::Embed(_) => "embed",
            Command::Audit(_) => "audit",
            Command::Curve(_) => "curve",
            Command::Roc(_) => "roc",
            Command::Report(_) => "report",
            Command::Review(_) => "review",
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthCorpusArgs {
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training images.
    #[arg(long)]
    pub train: Option<usize>,
    /// Validation images.
    #[arg(long)]
    pub val: Option<usize>,
    /// Novel synthetic images.
    #[arg(long)]
    pub novel: Option<usize>,
    /// Exact copies of training images among the synthetics.
    #[arg(long)]
    pub exact: Option<usize>,
    /// Augmented copies of training images among the synthetics.
    #[arg(long)]
    pub aug: Option<usize>,
    /// Image size, e.g. 32x32 or 16x32x32.
    #[arg(long)]
    pub dims: Option<Dims>,
    /// Per-axis flip probability for augmented copies.
    #[arg(long)]
    pub flip_prob: Option<f64>,
    /// Maximum absolute rotation in degrees for augmented copies.
    #[arg(long)]
    pub rotation_deg: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainEncoderArgs {
    /// Image directory (a corpus directory or a folder of .mimg files).
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Role to read from a corpus directory.
    #[arg(long)]
    pub role: Option<String>,
    /// Output model file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Pooling grid, e.g. 8x8.
    #[arg(long)]
    pub grid: Option<Dims>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Pairs per batch.
    #[arg(long)]
    pub batch_k: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub tau_temp: Option<f64>,
    /// Hidden layer widths, e.g. 256,128.
    #[arg(long)]
    pub hidden: Option<Dims>,
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the per-epoch loss trace as JSON.
    #[arg(long)]
    pub loss_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// Encoder model; without it the pooled features are written as-is.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// train, val or synth; also the role tag of the output.
    #[arg(long)]
    pub role: Option<String>,
    /// Pooling grid; defaults to the grid stored in the model.
    #[arg(long)]
    pub grid: Option<Dims>,
    /// Output MEMB file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long)]
    pub synth: Option<PathBuf>,
    /// Calibration percentile of nearest-validation correlation.
    #[arg(long)]
    pub percentile: Option<f64>,
    /// Fixed threshold instead of calibration.
    #[arg(long)]
    pub tau: Option<f32>,
    /// Audit this never-trained-on set instead of the training set.
    #[arg(long)]
    pub holdout: Option<PathBuf>,
    /// Output report JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Checkpoint embeddings in order, as PATH or LABEL=PATH. Repeatable.
    #[arg(long = "synth")]
    pub synth: Vec<String>,
    #[arg(long)]
    pub percentile: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RocArgs {
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long)]
    pub synth: Option<PathBuf>,
    /// Label store (JSON Lines).
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Percentile grid, comma separated (default 1..99).
    #[arg(long, value_delimiter = ',')]
    pub percentiles: Option<Vec<f64>>,
    /// Output stem; writes <stem>.json and <stem>.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Audit report JSON.
    #[arg(long)]
    pub audit: Option<PathBuf>,
    #[arg(long)]
    pub curve: Option<PathBuf>,
    #[arg(long)]
    pub roc: Option<PathBuf>,
    /// Label store; adds sensitivity and specificity.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Real-data features for FID.
    #[arg(long)]
    pub real_features: Option<PathBuf>,
    /// Synthetic features for FID.
    #[arg(long)]
    pub synth_features: Option<PathBuf>,
    /// Synthetic images for MS-SSIM diversity.
    #[arg(long)]
    pub synth_images: Option<PathBuf>,
    /// Seed for MS-SSIM partner selection.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output stem; writes <stem>.txt and <stem>.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReviewArgs {
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub images: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub host: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
    /// Review a seeded random subset of this many pairs.
    #[arg(long)]
    pub sample: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory of UI assets served at /.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
}
