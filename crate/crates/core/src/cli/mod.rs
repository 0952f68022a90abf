//! Command-line harness: data generation, training, runs, ablations and
//! plots.

mod args;
mod commands;
mod config;
mod plot;

pub use args::{AblateArgs, Cli, Command, DataArgs, EvalArgs, GlobalArgs, PlotArgs, RunArgs, SwitchArgs, TableChoice};
pub use commands::{
    ablate, execute, read_metrics, thread_count, AblationResult, RunManifest, ABLATION, ACCURACY_SVG, BOUNDARY,
    FORGETTING, LOSS_SVG, MANIFEST, METRICS, SCHEDULE, SOURCE_CKPT, SOURCE_HOLDOUT, SOURCE_TRAIN, SUMMARY,
    TARGET_STREAM, WARMUP_CKPT,
};
pub use config::{apply_switches, flatten, load_config, parse_config, render_config};
pub use plot::{line_chart, loss_series, Series};
