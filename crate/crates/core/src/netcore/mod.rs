//! Dense numerical core: tensors, block networks, reverse-mode gradients,
//! optimisers and checkpoints.

pub mod autograd;
pub mod checkpoint;
pub mod gradcheck;
pub mod network;
pub mod optim;
mod params;
mod tensor;

pub use autograd::{Gradients, Graph, Var, PROB_FLOOR};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use gradcheck::{grad_check, Leaves};
pub use network::{Activation, Forward, GraphForward, Network, NetworkSpec};
pub use optim::{ema_update, AdamConfig, AdamState};
pub use params::ParamSet;
pub use tensor::{normalize_rows, softmax_into, softmax_rows, Tensor};
