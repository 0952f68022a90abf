//! The online adaptation loop.
//!
//! A student and an EMA teacher start from a warmed-up source model. Each
//! incoming batch is queued, the student takes a few consistency steps on
//! queue samples, the pair's averaged prediction is committed, and the
//! student then takes one consistency and one entropy step on the batch.
//! Periodic student snapshots are replayed when the consistency loss spikes.

mod config;
mod pipeline;
mod run;
mod sample_queue;
mod state;
mod steps;
mod training;

pub use config::{
    component_rows, configure_ablation, replay_rows, AblationRow, AdaptConfig, Averaging, BeeConfig, CarConfig,
    Consistency, ConsistencyConfig, DataConfig, MergeKind, ModelConfig, Preset, ReplayStrategy, SourceConfig,
    Switches, WarmupConfig,
};
pub use pipeline::{init_params, make_benchmark, prepare, run_prepared, Benchmark, Prepared};
pub use run::{run, DomainError, RunOutput, RunSummary, StepReport};
pub use sample_queue::SampleQueue;
pub use state::{BeeState, MergeEvent, Phase, StepOutcome};
pub use steps::{entropy_step, mcr_step, predict, prediction_step};
pub use training::{
    accuracy, eval_source_holdout, train_source, warm_state_from_params, warm_state_to_params, warmup, WarmState,
};
