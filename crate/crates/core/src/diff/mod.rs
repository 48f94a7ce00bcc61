//! Minimal reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Graph`] is an append-only tape. Every operation appends a node whose
//! inputs are strictly earlier nodes, so the tape is acyclic by construction
//! and [`Graph::backward`] is a single reverse sweep.
//!
//! Tensors have rank 1 or 2 and are stored row-major.

mod check;
mod graph;
mod tensor;

pub use check::{analytic_gradient, grad_check, numeric_gradient, relative_error};
pub use graph::{Gradients, Graph, NodeId};
pub use tensor::Tensor;

/// Below this squared norm the gradient of a β-norm is taken to be zero.
pub const SINGULARITY_EPS: f64 = 1e-24;
