//! Multi-level consistency regularisation.
//!
//! Intermediate features of the student and the teacher are compressed into
//! assignment distributions over per-block codebooks. Teacher assignments are
//! balanced over prototypes with Sinkhorn-Knopp (using a queue of recent
//! teacher features) and serve as cross-entropy targets for the student.

mod codebook;
mod loss;
mod queue;
mod sinkhorn;

pub use codebook::{init_codebooks, student_assign, teacher_similarities, Codebook, CodebookPair};
pub use loss::{
    codebook_param_name, mcr_block_loss, teacher_codebook_name, McrConfig, McrLoss, McrState,
};
pub use queue::FeatureQueue;
pub use sinkhorn::{sinkhorn_normalize, sinkhorn_traced, AssignmentMatrix};
