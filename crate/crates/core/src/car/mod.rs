//! Complementary anchor replay.
//!
//! The student is snapshotted into a bounded pool at a fixed period. When the
//! smoothed consistency loss spikes, the anchors whose predictions on the
//! current batch disagree most with the student are merged back into it, each
//! weighted by a softmax over its total divergence from the rest of the set.

mod anchors;
mod detector;
mod divergence;
mod merge;

pub use anchors::{select_candidates, Anchor, AnchorPool, CandidateSet, Member};
pub use detector::{DetectorConfig, ShiftDetector};
pub use divergence::{divergence, predict_probs, sym_kl};
pub use merge::{ensemble_weights, merge, uniform_weights, weights_from_divergences};
