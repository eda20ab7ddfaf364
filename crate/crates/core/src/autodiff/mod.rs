//! Minimal reverse-mode automatic differentiation over dense `f32` tensors.
//!
//! A [`Graph`] records every operation applied to its [`Var`]s together with
//! whatever the backward pass needs (im2col buffers, pooling winners, softmax
//! probabilities). [`Graph::backward`] walks the record in exact reverse order
//! and accumulates gradients into the trainable parameters of a
//! [`ParamStore`]. Optimizers then update the store in place.

mod checkpoint;
mod graph;
pub(crate) mod kernels;
mod optim;
mod param;
mod tensor;

pub use checkpoint::{read_qck, read_qck_file, write_qck, write_qck_file};
pub use graph::{Graph, Var};
pub use optim::{Optimizer, OptimizerKind};
pub use param::{ParamId, ParamStore, Parameter};
pub use tensor::Tensor;
