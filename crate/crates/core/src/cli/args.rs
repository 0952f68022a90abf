use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::beeloop::{Preset, ReplayStrategy};

#[derive(Debug, Parser)]
#[command(name = "bee", version, about = "Continual test-time adaptation on synthetic drifting streams")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Flat TOML config; keys are dotted, e.g. `car.xi = 30`.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed all randomness derives from.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    pub force: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write source train/holdout and target stream datasets.
    GenData {
        /// Number of target domains.
        #[arg(long)]
        domains: Option<usize>,
    },
    /// Train the source model and save `source.ckpt`.
    TrainSource(DataArgs),
    /// Warm up teacher and codebooks from `source.ckpt`; save `warmup.ckpt`.
    Warmup(DataArgs),
    /// Adapt over the target stream and write metrics, summary and manifest.
    Run(RunArgs),
    /// Run the component or replay ablation rows over several seeds.
    Ablate(AblateArgs),
    /// Source-holdout accuracy of a checkpoint, or per domain boundary with
    /// and without anchor replay.
    EvalSource(EvalArgs),
    /// Render metrics JSONL or boundary-accuracy CSV files as SVG charts.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Directory with datasets from `gen-data`; generated from the seed when
    /// absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SwitchArgs {
    /// Method preset applied before the other switches: bee, entropy-only,
    /// source-only or pred-consistency
    #[arg(long, value_parser = parse_preset)]
    pub preset: Option<Preset>,
    /// Disable anchor replay.
    #[arg(long)]
    pub no_car: bool,
    /// Disable the sample queue and its inner steps.
    #[arg(long)]
    pub no_queue: bool,
    /// Comma-separated blocks for codebook consistency; empty disables it.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub mcr_blocks: Option<Vec<usize>>,
    /// Replay strategy: trigger, fixed:N, source-reset, average or weighted
    #[arg(long, value_parser = parse_strategy)]
    pub car_strategy: Option<ReplayStrategy>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub switches: SwitchArgs,
    /// Produce missing source and warm-up checkpoints instead of failing.
    #[arg(long)]
    pub auto: bool,
    /// Save the anchor pool as checkpoints under `anchors/`.
    #[arg(long)]
    pub dump_anchors: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableChoice {
    Components,
    Replay,
    All,
}

#[derive(Debug, Clone, Args)]
pub struct AblateArgs {
    #[arg(long, value_enum, default_value_t = TableChoice::All)]
    pub table: TableChoice,
    /// Number of seeds, counted up from `--seed`.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Evaluate this checkpoint alone instead of comparing runs.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    /// `.jsonl` metrics files or boundary-accuracy `.csv` files.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Series labels, in input order; file stems by default.
    #[arg(long, value_delimiter = ',')]
    pub labels: Vec<String>,
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse().map_err(|e: crate::Error| e.to_string())
}

fn parse_strategy(s: &str) -> Result<ReplayStrategy, String> {
    s.parse().map_err(|e: crate::Error| e.to_string())
}
