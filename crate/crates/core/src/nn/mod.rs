//! Feed-forward networks, losses and checkpoints.

pub mod checkpoint;
mod loss;
mod mlp;

pub use loss::{loss, LossKind, LossSpec, Targets};
pub use mlp::{Activation, DropoutSpec, ForwardMode, Mlp, MlpSpec};
