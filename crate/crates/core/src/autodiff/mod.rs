//! Minimal reverse-mode differentiation over dense `f64` tensors.
//!
//! A [`Graph`] records every op as it executes; [`Graph::backward`] sweeps the
//! record in reverse. Model code registers its parameters as leaves of a fresh
//! graph for every example, so graphs are short-lived and never shared.

mod gradcheck;
mod graph;
pub mod kernels;
mod optim;
mod suite;
mod tensor;

pub use gradcheck::{finite_diff_check, GradCheckReport, GRAD_MAGNITUDE_FLOOR};
pub use graph::{Graph, PoolMode, Var, LAYER_NORM_EPS};
pub use kernels::{softmax, sparsemax, Normalizer};
pub use optim::{adam_step, Adam};
pub use suite::{op_names, op_suite, OpCheck};
pub use tensor::Tensor;

#[cfg(test)]
mod tests;
