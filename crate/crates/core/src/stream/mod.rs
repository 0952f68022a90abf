//! Synthetic source task and a continually drifting target stream.
//!
//! Source data are Gaussian class blobs. Target domains apply one seeded
//! corruption each (noise, rotation, scaling, coordinate masking or a mean
//! shift) to fresh samples of the same blobs. Labels and domain ids travel
//! with each batch for the evaluator only.

mod corrupt;
mod dataset;
mod schedule;
mod source;

pub use corrupt::{corrupt, Corruption, CorruptionKind, CorruptionSpec, SeverityTable};
pub use dataset::{decode_dataset, encode_dataset, load_dataset, save_dataset, DATASET_MAGIC, DATASET_VERSION};
pub use schedule::{DomainSchedule, DomainSpec, HiddenLabels, LabeledBatch, TargetStream, DEFAULT_DOMAINS};
pub use source::{gen_source, Dataset, SourceTask};
