use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use d3net_core::wavelet::Family;
use d3net_model::PairSource;

#[derive(Debug, Parser)]
#[command(name = "d3net", version, about = "Multi-frame turbulence mitigation: wavelet fusion, denoising and x2 upsampling")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Seed for every random choice the command makes [default: 0, or the config file's "seed"]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON file with command settings; flags given on the command line take precedence
    #[arg(long, global = true, value_name = "JSON")]
    pub config: Option<PathBuf>,
    /// Worker threads [default: all cores]. Outputs do not depend on this
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write seeded synthetic clean images
    Synth(SynthArgs),
    /// Degrade every clean image into a frame sequence and write a dataset manifest
    Degrade(DegradeArgs),
    /// Train a d2net or rdfdbk network on a dataset manifest
    Train(TrainArgs),
    /// Restore one frame sequence
    Restore(RestoreArgs),
    /// Compare single frame, frame average, fusion and the full pipeline on a dataset
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of images [default: 10]
    #[arg(long)]
    pub count: Option<usize>,
    /// Image height [default: 128]
    #[arg(long)]
    pub height: Option<usize>,
    /// Image width [default: 128]
    #[arg(long)]
    pub width: Option<usize>,
    /// Channels, 1 or 3 [default: 1]
    #[arg(long)]
    pub channels: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DegradeArgs {
    /// Directory of clean .png/.pfm images
    #[arg(long)]
    pub clean: Option<PathBuf>,
    /// Output dataset directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Degraded variations per clean image [default: 16]
    #[arg(long)]
    pub frames: Option<usize>,
    /// Per-component displacement std-dev, pixels [default: 1.0]
    #[arg(long)]
    pub tilt_sigma: Option<f64>,
    /// Smoothing length of the displacement field, pixels [default: 8.0]
    #[arg(long)]
    pub tilt_corr: Option<f64>,
    /// Blur std-dev, pixels [default: 1.2]
    #[arg(long)]
    pub blur_sigma: Option<f64>,
    /// Additive noise std-dev [default: 0.01]
    #[arg(long)]
    pub noise_sigma: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FusionArgs {
    /// Wavelet levels [default: 2]
    #[arg(long)]
    pub levels: Option<usize>,
    /// Wavelet family: haar or db2 [default: haar]
    #[arg(long)]
    pub family: Option<Family>,
    /// Odd side of the similarity window, pixels [default: 7]
    #[arg(long)]
    pub roi_size: Option<usize>,
    /// Intensity-similarity scale [default: 0.1]
    #[arg(long)]
    pub sigma_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModelKind {
    D2net,
    Rdfdbk,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset manifest
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Checkpoint to write
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON-lines training log [default: <out>.log.jsonl]
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Network to train [default: d2net]
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    /// Training pairs: frames, fused or downsampled [default: fused for d2net, downsampled for rdfdbk]
    #[arg(long)]
    pub source: Option<PairSource>,
    /// Continue from this checkpoint instead of a fresh initialization
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Iterations to run [default: 1000]
    #[arg(long)]
    pub iters: Option<u64>,
    /// Batch size [default: 32]
    #[arg(long)]
    pub batch: Option<usize>,
    /// Target patch side, pixels [default: 16]
    #[arg(long)]
    pub patch: Option<usize>,
    /// Write the checkpoint every N iterations, 0 for only at the end [default: 0]
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
    /// d2net channel width multiplier [default: 1.0]
    #[arg(long)]
    pub width: Option<f64>,
    /// Residual blocks per stage [default: 2 for d2net, 4 for rdfdbk]
    #[arg(long)]
    pub blocks: Option<usize>,
    /// rdfdbk feature channels [default: 32]
    #[arg(long)]
    pub features: Option<usize>,
    /// rdfdbk feedback time steps [default: 3]
    #[arg(long)]
    pub time_steps: Option<usize>,
    #[command(flatten)]
    pub fusion: FusionArgs,
}

#[derive(Debug, Args)]
pub struct RestoreArgs {
    /// Directory of frames, read in lexicographic filename order
    #[arg(long)]
    pub frames: Option<PathBuf>,
    /// Restored image (.png or .pfm)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// d2net checkpoint [default: identity network]
    #[arg(long)]
    pub d2net: Option<PathBuf>,
    /// rdfdbk checkpoint [default: nearest-neighbour x2]
    #[arg(long)]
    pub rdfdbk: Option<PathBuf>,
    /// Also write fusion maps, fused images and the d2net output as PFM files here
    #[arg(long, value_name = "DIR")]
    pub dump_intermediate: Option<PathBuf>,
    #[command(flatten)]
    pub fusion: FusionArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Dataset manifest with ground truth
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Output directory for report.json and report.txt
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// d2net checkpoint [default: identity network]
    #[arg(long)]
    pub d2net: Option<PathBuf>,
    /// rdfdbk checkpoint [default: nearest-neighbour x2]
    #[arg(long)]
    pub rdfdbk: Option<PathBuf>,
    /// Record wall-clock milliseconds per row (the report is then not reproducible)
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub fusion: FusionArgs,
}
