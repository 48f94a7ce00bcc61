//! The weighted β-norm loss family and the energy score built from it.
//!
//! `Δ(y, y') = (Σ_i w_i (y_i − y'_i)²)^{β/2}` with `0 < β < 2`. For these β
//! the score `E Δ(Y, y) − ½ E Δ(Y, Y')` is strictly proper, so the induced
//! divergence vanishes only when the two distributions agree.

use alloc::format;
use alloc::vec::Vec;

use crate::diff::Tensor;
use crate::math;
use crate::netgen::CandidateSet;
use crate::{Error, Result};

/// A loss `Δ` from the weighted β-norm family.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSpec {
    beta: f64,
    /// Empty means unit weights in every dimension.
    weights: Vec<f64>,
}

impl Default for LossSpec {
    fn default() -> Self {
        Self::euclidean(1.0).expect("β = 1 is valid")
    }
}

impl LossSpec {
    pub fn new(beta: f64, weights: Vec<f64>) -> Result<Self> {
        if !(beta > 0.0 && beta < 2.0) {
            return Err(Error::Parameter(format!(
                "beta must lie in (0, 2), got {beta}"
            )));
        }
        if !weights.is_empty() {
            if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
                return Err(Error::Parameter(
                    "loss weights must be finite and >= 0".into(),
                ));
            }
            if weights.iter().all(|&w| w == 0.0) {
                return Err(Error::Parameter("loss weights must not all be zero".into()));
            }
        }
        Ok(Self { beta, weights })
    }

    /// `‖y − y'‖₂^β`.
    pub fn euclidean(beta: f64) -> Result<Self> {
        Self::new(beta, Vec::new())
    }

    /// Emphasises the first of two dimensions: weights `(10, 0.1)`, β = 1.
    pub fn delta_a() -> Self {
        Self::new(1.0, alloc::vec![10.0, 0.1]).expect("valid")
    }

    /// Emphasises the second of two dimensions: weights `(0.1, 10)`, β = 1.
    pub fn delta_b() -> Self {
        Self::new(1.0, alloc::vec![0.1, 10.0]).expect("valid")
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_unit_weighted(&self) -> bool {
        self.weights.is_empty() || self.weights.iter().all(|&w| w == 1.0)
    }

    /// Dense weight vector for a `dim`-dimensional output.
    pub fn weight_tensor(&self, dim: usize) -> Result<Tensor> {
        if self.weights.is_empty() {
            Tensor::vector(alloc::vec![1.0; dim])
        } else if self.weights.len() == dim {
            Tensor::vector(self.weights.clone())
        } else {
            Err(Error::dim("loss weights", &[self.weights.len()], &[dim]))
        }
    }

    /// Δ between two slices, checking lengths.
    pub fn eval(&self, y: &[f64], y2: &[f64]) -> Result<f64> {
        if y.len() != y2.len() {
            return Err(Error::dim("delta", &[y.len()], &[y2.len()]));
        }
        if !self.weights.is_empty() && self.weights.len() != y.len() {
            return Err(Error::dim(
                "delta weights",
                &[self.weights.len()],
                &[y.len()],
            ));
        }
        Ok(self.eval_unchecked(y, y2))
    }

    /// Δ without dimension checks; callers guarantee matching lengths.
    #[inline]
    pub(crate) fn eval_unchecked(&self, y: &[f64], y2: &[f64]) -> f64 {
        let s: f64 = if self.weights.is_empty() {
            y.iter().zip(y2).map(|(a, b)| (a - b) * (a - b)).sum()
        } else {
            y.iter()
                .zip(y2)
                .zip(&self.weights)
                .map(|((a, b), w)| w * (a - b) * (a - b))
                .sum()
        };
        if self.beta == 1.0 {
            math::sqrt(s)
        } else {
            math::powf(s, self.beta / 2.0)
        }
    }
}

/// `Δ(y, y2)` for two tensors of equal length.
pub fn delta(spec: &LossSpec, y: &Tensor, y2: &Tensor) -> Result<f64> {
    spec.eval(y.data(), y2.data())
}

/// Mean loss from `y` to each candidate: `(1/K) Σ_k Δ(y, g_k)`.
pub(crate) fn mean_loss_to(spec: &LossSpec, y: &[f64], candidates: &[Tensor]) -> Result<f64> {
    let mut s = 0.0;
    for c in candidates {
        s += spec.eval(y, c.data())?;
    }
    Ok(s / candidates.len() as f64)
}

/// Mean over ordered pairs `k ≠ k'` of `Δ(g_k, g_k')`.
pub(crate) fn mean_pairwise(spec: &LossSpec, candidates: &[Tensor]) -> Result<f64> {
    let k = candidates.len();
    if k < 2 {
        return Err(Error::Estimator {
            required: 2,
            got: k,
        });
    }
    let mut s = 0.0;
    for (i, a) in candidates.iter().enumerate() {
        for (j, b) in candidates.iter().enumerate() {
            if i != j {
                s += spec.eval(a.data(), b.data())?;
            }
        }
    }
    Ok(s / (k * (k - 1)) as f64)
}

/// Per-example energy score
/// `(1/K) Σ_k Δ(y, g_k) − 1/(2K(K−1)) Σ_k Σ_{k'≠k} Δ(g_k', g_k)`.
pub fn energy_score_sample(
    candidates: &CandidateSet,
    y_true: &Tensor,
    spec: &LossSpec,
) -> Result<f64> {
    energy_score(&candidates.candidates, y_true.data(), spec)
}

pub(crate) fn energy_score(candidates: &[Tensor], y_true: &[f64], spec: &LossSpec) -> Result<f64> {
    let qq = mean_pairwise(spec, candidates)?;
    let pq = mean_loss_to(spec, y_true, candidates)?;
    Ok(pq - 0.5 * qq)
}

/// A finitely supported distribution over `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    support: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(support: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != probs.len() {
            return Err(Error::Contract(format!(
                "support has {} points but {} probabilities were given",
                support.len(),
                probs.len()
            )));
        }
        let d = support[0].len();
        if d == 0 || support.iter().any(|p| p.len() != d) {
            return Err(Error::Contract(
                "support points must share a positive dimension".into(),
            ));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::Contract("probabilities must be non-negative".into()));
        }
        let total: f64 = probs.iter().sum();
        if math::abs(total - 1.0) > 1e-12 {
            return Err(Error::Contract(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        for i in 0..support.len() {
            for j in 0..i {
                if support[i] == support[j] {
                    return Err(Error::Contract(format!(
                        "support points {j} and {i} coincide"
                    )));
                }
            }
        }
        Ok(Self { support, probs })
    }

    pub fn point_mass(at: Vec<f64>) -> Result<Self> {
        Self::new(alloc::vec![at], alloc::vec![1.0])
    }

    pub fn support(&self) -> &[Vec<f64>] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn dim(&self) -> usize {
        self.support[0].len()
    }
}

/// Exact `DIV(P, Q) = E_{Y∼P, Y'∼Q} Δ(Y, Y')` over finite supports.
pub fn expected_loss(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    spec: &LossSpec,
) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::dim("expected_loss", &[p.dim()], &[q.dim()]));
    }
    let mut s = 0.0;
    for (a, pa) in p.support.iter().zip(&p.probs) {
        for (b, qb) in q.support.iter().zip(&q.probs) {
            s += pa * qb * spec.eval(a, b)?;
        }
    }
    Ok(s)
}

/// Score divergence `d(Q, P) = DIV(P, Q) − ½ DIV(Q, Q) − ½ DIV(P, P)`.
pub fn divergence_discrete(
    q: &DiscreteDistribution,
    p: &DiscreteDistribution,
    spec: &LossSpec,
) -> Result<f64> {
    let pq = expected_loss(p, q, spec)?;
    let qq = expected_loss(q, q, spec)?;
    let pp = expected_loss(p, p, spec)?;
    Ok(pq - 0.5 * qq - 0.5 * pp)
}
