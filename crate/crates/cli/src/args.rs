use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use flow_eval::datasets::{ExtrapolationMode, GeometryChannel};

#[derive(Debug, Parser)]
#[command(name = "flow-eval", version, about = "Score predicted flow fields with the M1/M2/M3 metrics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate predictions against a dataset and write a report.
    Evaluate(EvaluateArgs),
    /// Build and persist a train/test split.
    Split(SplitArgs),
    /// Merge reports into a leaderboard table.
    Table(TableArgs),
    /// Run the built-in analytic self-checks.
    Verify(VerifyArgs),
    /// Write a manufactured dataset with known metric values.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GeometryFlag {
    Sdf,
    Mask,
}

impl GeometryFlag {
    pub fn channel(self) -> GeometryChannel {
        match self {
            GeometryFlag::Sdf => GeometryChannel::Sdf,
            GeometryFlag::Mask => GeometryChannel::Mask,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GeometryFlag::Sdf => "sdf",
            GeometryFlag::Mask => "mask",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Difficulty {
    Random,
    Extrapolatory,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Ground-truth archive (canonical directory/zip or npz).
    #[arg(long)]
    pub data: PathBuf,
    /// Prediction archive, matched to the data by sample id.
    #[arg(long)]
    pub pred: PathBuf,
    /// Geometry representation that defines the metric regions.
    #[arg(long, value_enum, default_value = "sdf")]
    pub geometry: GeometryFlag,
    /// Boundary-layer band as LO:HI in SDF units.
    #[arg(long, value_name = "LO:HI")]
    pub band: Option<String>,
    /// Split file; only its test ids are evaluated.
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Training-set size the predictions came from.
    #[arg(long, value_name = "N")]
    pub subset: Option<usize>,
    /// JSON evaluation config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// JSON channel map for npz archives.
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: ReportFormat,
    /// Worker threads for per-sample evaluation.
    #[arg(long, env = "FLOW_EVAL_THREADS")]
    pub jobs: Option<usize>,
    /// Add wall time, throughput and peak memory to the report.
    #[arg(long)]
    pub timing: bool,
    /// Pair predictions with samples by position instead of id.
    #[arg(long)]
    pub align_by_order: bool,
    /// Model label; defaults to the prediction file stem.
    #[arg(long)]
    pub model: Option<String>,
    /// Representation label; defaults to the --geometry value.
    #[arg(long)]
    pub representation: Option<String>,
    /// Dataset label; defaults to the data file stem.
    #[arg(long)]
    pub dataset_name: Option<String>,
    /// Difficulty label when no split file is given.
    #[arg(long, value_enum)]
    pub difficulty: Option<Difficulty>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolFlag {
    Random,
    Extrapolatory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeFlag {
    Quantile,
    Span,
}

impl From<ModeFlag> for ExtrapolationMode {
    fn from(m: ModeFlag) -> Self {
        match m {
            ModeFlag::Quantile => ExtrapolationMode::Quantile,
            ModeFlag::Span => ExtrapolationMode::Span,
        }
    }
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "random")]
    pub protocol: ProtocolFlag,
    /// Test fraction (random) or per-tail fraction (extrapolatory).
    #[arg(long)]
    pub fraction: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// How extrapolatory tails are cut.
    #[arg(long, value_enum, default_value = "quantile")]
    pub mode: ModeFlag,
    /// Draw a training subset of this size.
    #[arg(long, value_name = "N")]
    pub subset: Option<usize>,
    /// Equal subset counts per geometry category.
    #[arg(long, requires = "subset")]
    pub stratified: bool,
    /// Subsample this persisted split instead of splitting afresh.
    #[arg(long, requires = "subset")]
    pub parent: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Markdown,
    Csv,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    /// Report JSON files.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "markdown")]
    pub format: TableFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FaultFlag {
    FirstOrderGradient,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Only run checks whose name contains this string.
    #[arg(long)]
    pub filter: Option<String>,
    /// Swap in a deliberately broken component to show the checks bite.
    #[arg(long, value_enum, hide = true)]
    pub inject_fault: Option<FaultFlag>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindFlag {
    PolynomialShear,
    RadialDisc,
    ProductSine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PredictionFlag {
    Zero,
    Truth,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub kind: KindFlag,
    /// Nodes per axis on the square [0, 2] x [0, 2] domain.
    #[arg(long, default_value_t = 129)]
    pub nx: usize,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Reynolds numbers are spaced evenly from --re-min to --re-max.
    #[arg(long, default_value_t = 10.0)]
    pub re_min: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub re_max: f64,
    /// Shear rate for polynomial-shear.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Dataset archive to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a prediction archive.
    #[arg(long)]
    pub pred_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "zero")]
    pub pred: PredictionFlag,
    /// Also write the expected zero-prediction metrics as JSON.
    #[arg(long)]
    pub expected_out: Option<PathBuf>,
    /// Config used for the expected values.
    #[arg(long)]
    pub config: Option<PathBuf>,
}
