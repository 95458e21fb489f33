use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;
use shutterforge::distillation::{
    CharbonnierMode, DEFAULT_CHARBONNIER_EPS, DEFAULT_LAMBDA_D, DEFAULT_OUTLIER_K,
};
use shutterforge::metrics::{DEFAULT_VALID_MIN, PSNR_CAP_DB};

#[derive(Debug, Parser)]
#[command(name = "shutterforge", version, about = "Blur / rolling-shutter triple synthesis and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize blur/RS/latent triples from one directory of frames.
    Synth(SynthArgs),
    /// Apply one perturbation to a tensor, a frame directory or a manifest.
    Perturb(PerturbArgs),
    /// Write the relative temporal position encoding maps.
    Encode(EncodeArgs),
    /// Compute distillation masks.
    Mask(MaskArgs),
    /// Compute reconstruction, distillation and total losses.
    Loss(LossArgs),
    /// Compute an evaluation metric.
    Metric(MetricArgs),
    /// Dataset ingestion, materialization, verification and splitting.
    #[command(subcommand)]
    Dataset(DatasetCommand),
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Scan a directory of scenes and write a manifest.
    Ingest(IngestArgs),
    /// Write every tensor planned by a manifest.
    Materialize(MaterializeArgs),
    /// Check materialized tensors against a fresh recomputation.
    Verify(VerifyArgs),
    /// Assign scenes to train/val/test.
    Split(SplitArgs),
}

impl Command {
    /// Report name and echoed parameters.
    pub fn describe(&self) -> (String, Value) {
        fn v<T: Serialize>(t: &T) -> Value {
            serde_json::to_value(t).expect("arguments serialize")
        }
        match self {
            Command::Synth(a) => ("synth".into(), v(a)),
            Command::Perturb(a) => ("perturb".into(), v(a)),
            Command::Encode(a) => ("encode".into(), v(a)),
            Command::Mask(a) => ("mask".into(), v(a)),
            Command::Loss(a) => ("loss".into(), v(a)),
            Command::Metric(a) => ("metric".into(), v(a)),
            Command::Dataset(DatasetCommand::Ingest(a)) => ("dataset ingest".into(), v(a)),
            Command::Dataset(DatasetCommand::Materialize(a)) => ("dataset materialize".into(), v(a)),
            Command::Dataset(DatasetCommand::Verify(a)) => ("dataset verify".into(), v(a)),
            Command::Dataset(DatasetCommand::Split(a)) => ("dataset split".into(), v(a)),
        }
    }
}

/// Where and how frames are read from a directory.
#[derive(Debug, Args, Serialize)]
pub struct FrameInput {
    /// Frame file extension (`sft` or `png`).
    #[arg(long, default_value = "sft")]
    pub ext: String,
    /// Sample depth of PNG frames (8 or 16).
    #[arg(long, default_value_t = 8)]
    pub bit_depth: u32,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Directory of `frame_*` files.
    #[arg(long)]
    pub input: PathBuf,
    /// Exposure length T in frames; must equal --crop.
    #[arg(long)]
    pub exposure: usize,
    /// Deadtime D in frames between windows.
    #[arg(long, default_value_t = 0)]
    pub deadtime: usize,
    /// Number of latent targets per window.
    #[arg(long)]
    pub n_latent: usize,
    /// Centre-crop size.
    #[arg(long)]
    pub crop: usize,
    /// Base seed for perturbation variants.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Perturbation spec as JSON, e.g. '{"kind":"spatial_shift","max_offset":8,"seed":1}'.
    /// May be repeated.
    #[arg(long = "perturb")]
    pub perturb: Vec<String>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub frames: FrameInput,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum KindArg {
    SpatialShift,
    TemporalShift,
    LowLight,
    Stereo,
}

#[derive(Debug, Args, Serialize)]
pub struct PerturbArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Spatial shift bound n: offsets are uniform in [-n, n].
    #[arg(long, default_value_t = 8)]
    pub max_offset: usize,
    /// Temporal shift delay range, lower end.
    #[arg(long, default_value_t = 5)]
    pub lo: usize,
    /// Temporal shift delay range, upper end.
    #[arg(long, default_value_t = 15)]
    pub hi: usize,
    /// Low-light photon peak.
    #[arg(long, default_value_t = 500.0)]
    pub peak: f64,
    #[arg(long, default_value_t = 2.0)]
    pub gamma_lo: f64,
    #[arg(long, default_value_t = 3.5)]
    pub gamma_hi: f64,
    /// Stereo disparity scale.
    #[arg(long, default_value_t = 20.0)]
    pub d_up: f64,
    /// Constant normalized disparity in [0, 1].
    #[arg(long, default_value_t = 0.0)]
    pub disparity: f32,
    /// Mask tensor holding a per-pixel disparity map.
    #[arg(long)]
    pub disparity_path: Option<String>,
    /// An image tensor, or a frame directory (required for temporal_shift).
    #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
    pub input: Option<PathBuf>,
    /// A dataset manifest to extend with this perturbation.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// First frame of the exposure window (frame-directory input).
    #[arg(long, default_value_t = 0)]
    pub window_start: usize,
    /// Exposure length (frame-directory input); defaults to the frame height.
    #[arg(long)]
    pub exposure: Option<usize>,
    /// Output tensor, or output manifest with --manifest.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub frames: FrameInput,
}

#[derive(Debug, Args, Serialize)]
pub struct EncodeArgs {
    /// Image height H.
    #[arg(long)]
    pub height: usize,
    /// Number of latent frames N.
    #[arg(long)]
    pub n_latent: usize,
    /// Map width; defaults to the height.
    #[arg(long)]
    pub width: Option<usize>,
    /// Output directory for `tpe_XX.sft`.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct MaskArgs {
    /// Flow tensor for the dynamic mask.
    #[arg(long)]
    pub flow: Option<PathBuf>,
    /// Image tensor for the boundary mask.
    #[arg(long)]
    pub frame: Option<PathBuf>,
    /// Student prediction, for the error mask.
    #[arg(long, requires_all = ["teacher", "gt"])]
    pub student: Option<PathBuf>,
    /// Teacher prediction, for the error mask.
    #[arg(long, requires_all = ["student", "gt"])]
    pub teacher: Option<PathBuf>,
    /// Ground truth, for the error mask.
    #[arg(long, requires_all = ["student", "teacher"])]
    pub gt: Option<PathBuf>,
    /// Outlier multiplier on the interquartile range.
    #[arg(long, default_value_t = DEFAULT_OUTLIER_K)]
    pub k: f64,
    /// Combination weights w_d,w_b,w_e (sum to 1).
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CharbonnierArg {
    Elementwise,
    Global,
}

impl From<CharbonnierArg> for CharbonnierMode {
    fn from(a: CharbonnierArg) -> Self {
        match a {
            CharbonnierArg::Elementwise => CharbonnierMode::Elementwise,
            CharbonnierArg::Global => CharbonnierMode::Global,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct LossArgs {
    /// Student frames, in order.
    #[arg(long, num_args = 1.., required = true)]
    pub pred: Vec<PathBuf>,
    /// Ground-truth frames, in order.
    #[arg(long, num_args = 1.., required = true)]
    pub gt: Vec<PathBuf>,
    /// Teacher frames, in order.
    #[arg(long, num_args = 1..)]
    pub teacher_pred: Vec<PathBuf>,
    /// Student flows.
    #[arg(long, num_args = 1.., requires = "teacher_flow")]
    pub student_flow: Vec<PathBuf>,
    /// Teacher flows.
    #[arg(long, num_args = 1.., requires = "student_flow")]
    pub teacher_flow: Vec<PathBuf>,
    /// Distillation masks: one shared, or one per flow. Defaults to all ones.
    #[arg(long, num_args = 1..)]
    pub mask: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_CHARBONNIER_EPS)]
    pub eps: f64,
    #[arg(long, default_value_t = DEFAULT_LAMBDA_D)]
    pub lambda_d: f64,
    #[arg(long, value_enum, default_value = "elementwise")]
    pub charbonnier: CharbonnierArg,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum MetricKind {
    Psnr,
    Ssim,
    Mse,
    AbsRel,
    Delta,
    Tof,
    Profile,
}

#[derive(Debug, Args, Serialize)]
pub struct MetricArgs {
    #[arg(long, value_enum)]
    pub metric: MetricKind,
    /// Two image tensors (prediction, reference); two frame directories for
    /// tof; one frame directory for profile.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Delta thresholds; defaults to 1.15, 1.25 and 1.35.
    #[arg(long, value_delimiter = ',')]
    pub thr: Vec<f64>,
    /// Block size for tof.
    #[arg(long, default_value_t = 8)]
    pub block: usize,
    /// Search radius for tof.
    #[arg(long, default_value_t = 4)]
    pub radius: usize,
    /// Column for profile.
    #[arg(long)]
    pub column: Option<usize>,
    /// PSNR value reported for identical inputs.
    #[arg(long, default_value_t = PSNR_CAP_DB)]
    pub cap: f64,
    /// Smallest reference value counted by abs_rel and delta.
    #[arg(long, default_value_t = DEFAULT_VALID_MIN)]
    pub valid_min: f64,
    /// Output image for profile.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub frames: FrameInput,
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    /// Directory with one subdirectory per scene.
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub exposure: usize,
    #[arg(long, default_value_t = 0)]
    pub deadtime: usize,
    #[arg(long)]
    pub n_latent: usize,
    #[arg(long)]
    pub crop: usize,
    /// JSON file holding an array of perturbation specs.
    #[arg(long)]
    pub perturbations: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Manifest path to write.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub frames: FrameInput,
}

#[derive(Debug, Args, Serialize)]
pub struct MaterializeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output root.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Root that was materialized.
    #[arg(long)]
    pub dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub train: f64,
    #[arg(long)]
    pub val: f64,
    #[arg(long)]
    pub test: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Manifest path to write.
    #[arg(long)]
    pub out: PathBuf,
}
