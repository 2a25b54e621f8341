use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "blockcirc", version, about = "Train, evaluate and cost block-circulant networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a network and write the model plus a per-epoch CSV report.
    Train(TrainArgs),
    /// Print the test accuracy of a saved model.
    Eval(EvalArgs),
    /// Per-layer storage accounting as CSV.
    CompressReport(CompressArgs),
    /// Compare analytic and finite-difference gradients of a seeded network.
    GradCheck(GradCheckArgs),
    /// Search the (p, d) design space of the FFT engine and write the grid as CSV.
    Explore(ExploreArgs),
    /// Multiply counts of the dense-equivalent and circulant forward passes.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataKind {
    Mnist,
    Synth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PrecisionArg {
    F64,
    F32,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long, value_enum)]
    pub data: DataKind,
    /// Directory with the four MNIST IDX files (plain or gzipped).
    #[arg(long, env = "BLOCKCIRC_MNIST_DIR", default_value = "data/mnist")]
    pub mnist_dir: PathBuf,
    /// Keep only the first N training and test samples.
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long, default_value_t = 200)]
    pub synth_per_class: usize,
    /// Distance between synthetic class means, in standard deviations.
    #[arg(long, default_value_t = 4.0)]
    pub synth_separation: f64,
    #[arg(long, default_value_t = 0)]
    pub synth_seed: u64,
}

#[derive(Debug, Args)]
#[group(required = false, multiple = false)]
pub struct ArchSource {
    /// Architecture file; defaults to the shipped two-layer MNIST MLP.
    #[arg(long)]
    pub arch: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct NetSource {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Use a zero-initialized network of this architecture instead of a model file.
    #[arg(long)]
    pub arch: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub arch: ArchSource,
    /// Override the block size of every FC layer.
    #[arg(long)]
    pub block_size: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = PrecisionArg::F64)]
    pub precision: PrecisionArg,
    /// Also store a 16-bit fixed-point payload.
    #[arg(long)]
    pub quantize: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch CSV; defaults to the model path with a `.csv` extension.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Evaluate with 16-bit fixed-point weights.
    #[arg(long)]
    pub quantized: bool,
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    #[command(flatten)]
    pub source: NetSource,
    /// Bits per stored compressed value; defaults to the baseline width.
    #[arg(long)]
    pub bits: Option<u32>,
    #[arg(long, default_value_t = 32)]
    pub baseline_bits: u32,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradCheckArgs {
    #[command(flatten)]
    pub arch: ArchSource,
    #[arg(long)]
    pub block_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub step: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct ExploreArgs {
    #[command(flatten)]
    pub source: NetSource,
    /// Cost defaults file; the shipped FPGA-like calibration when omitted.
    #[arg(long)]
    pub costs: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub p_min: usize,
    #[arg(long, default_value_t = 64)]
    pub p_max: usize,
    #[arg(long, default_value_t = 3)]
    pub d_max: usize,
    /// `efficiency`, `perf-capped:<watts>` or `weighted:<alpha>,<beta>`.
    #[arg(long, default_value = "efficiency")]
    pub metric: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub source: NetSource,
    /// Seed of the random input.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
