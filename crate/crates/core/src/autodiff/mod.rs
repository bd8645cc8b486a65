//! Reverse-mode automatic differentiation over dense tensors.
//!
//! [`Tape`] records operations as they run; [`Tape::backward`] walks the record
//! in reverse. Passing `create_graph = true` records the backward pass as well,
//! so gradients can be differentiated a second time (Hessian-vector products,
//! gradients through an inner optimization step).

pub mod check;
mod tape;
mod tensor;

pub use tape::{Gradients, Tape, Var};
pub use tensor::{Real, Tensor};
