//! Dissimilarity-coefficient networks.
//!
//! A DISCO net is a generator `G(z, x; θ)` that turns an input `x` and a noise
//! sample `z` into a candidate output `y`. Training minimises an unbiased
//! estimate of `DIV(P, Q) − γ·DIV(Q, Q)` where `DIV` is the expected task loss
//! between samples of two distributions; with the β-norm loss and `γ = ½`
//! this is the energy score, a strictly proper scoring rule.
//!
//! This crate is `no_std` (it needs `alloc`). File formats, configuration and
//! the command line live in the companion `disco` crate.
//!
//! Modules:
//! - [`diff`]: a small reverse-mode autodiff over rank ≤ 2 tensors, plus a
//!   finite-difference gradient checker.
//! - [`netgen`]: the dense generator, its parameters and candidate sampling.
//! - [`scoring`]: the weighted β-norm loss family and the energy score.
//! - [`objective`]: the unbiased diversity estimators and the training
//!   objective, as plain values and as a differentiable graph node.
//! - [`metrics`]: MEU prediction, ProbLoss, joint errors, FF and Pearson
//!   matrices.
//! - [`synth`]: synthetic data and the grid-search Gaussian toy experiment.
//! - [`trainer`]: minibatch SGD with momentum over the objective.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod diff;
mod error;
pub(crate) mod math;
pub mod metrics;
pub mod netgen;
pub mod objective;
pub mod rngs;
pub mod scoring;
pub mod stats;
pub mod synth;
pub mod trainer;

pub use diff::{Graph, NodeId, Tensor};
pub use error::{Error, Result};
pub use netgen::{CandidateSet, NetConfig, NetworkParams};
pub use objective::ObjectiveConfig;
pub use scoring::LossSpec;
pub use stats::MeanSem;
pub use trainer::{TrainConfig, TrainHistory};

/// One supervised pair `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub x: Tensor,
    pub y: Tensor,
}

impl Example {
    pub fn new(x: Tensor, y: Tensor) -> Self {
        Self { x, y }
    }
}
