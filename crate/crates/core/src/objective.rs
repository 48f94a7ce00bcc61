//! Unbiased estimators of the diversity terms and the training objective
//! `F̂ = DIV̂(P, Q) − γ·DIV̂(Q, Q)`.

use alloc::format;
use alloc::vec::Vec;

use rand::RngCore;

use crate::diff::{Graph, NodeId, Tensor};
use crate::netgen::{self, BoundParams, CandidateSet, NetConfig, NetworkParams};
use crate::scoring::{self, LossSpec};
use crate::{Error, Example, Result};

/// γ, K and the loss used by the objective.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveConfig {
    pub gamma: f64,
    pub k: usize,
    pub loss: LossSpec,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            k: 16,
            loss: LossSpec::default(),
        }
    }
}

impl ObjectiveConfig {
    pub fn new(gamma: f64, k: usize, loss: LossSpec) -> Result<Self> {
        let c = Self { gamma, k, loss };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Parameter(format!(
                "gamma must lie in [0, 1], got {}",
                self.gamma
            )));
        }
        if self.k == 0 {
            return Err(Error::Parameter("K must be at least 1".into()));
        }
        if self.gamma > 0.0 && self.k < 2 {
            return Err(Error::Estimator {
                required: 2,
                got: self.k,
            });
        }
        Ok(())
    }
}

fn check_sets(batch_len: usize, sets: &[CandidateSet]) -> Result<usize> {
    if sets.is_empty() {
        return Err(Error::Contract("empty batch".into()));
    }
    if batch_len != sets.len() {
        return Err(Error::Contract(format!(
            "{} examples but {} candidate sets",
            batch_len,
            sets.len()
        )));
    }
    let k = sets[0].k();
    if sets.iter().any(|s| s.k() != k) {
        return Err(Error::Contract(
            "candidate sets must all have the same K".into(),
        ));
    }
    Ok(k)
}

/// `(1/N) Σ_n (1/K) Σ_k Δ(y_n, g_{n,k})`.
pub fn div_pq_hat(batch: &[Example], sets: &[CandidateSet], loss: &LossSpec) -> Result<f64> {
    check_sets(batch.len(), sets)?;
    let mut s = 0.0;
    for (ex, set) in batch.iter().zip(sets) {
        s += scoring::mean_loss_to(loss, ex.y.data(), &set.candidates)?;
    }
    Ok(s / batch.len() as f64)
}

/// `(1/N) Σ_n 1/(K(K−1)) Σ_k Σ_{k'≠k} Δ(g_{n,k}, g_{n,k'})`.
pub fn div_qq_hat(sets: &[CandidateSet], loss: &LossSpec) -> Result<f64> {
    check_sets(sets.len(), sets)?;
    let mut s = 0.0;
    for set in sets {
        s += scoring::mean_pairwise(loss, &set.candidates)?;
    }
    Ok(s / sets.len() as f64)
}

/// `div_pq_hat − γ·div_qq_hat`. The diversity term is skipped when `γ = 0`,
/// so that case also accepts `K = 1`.
pub fn disco_objective(
    batch: &[Example],
    sets: &[CandidateSet],
    config: &ObjectiveConfig,
) -> Result<f64> {
    let pq = div_pq_hat(batch, sets, &config.loss)?;
    if config.gamma == 0.0 {
        return Ok(pq);
    }
    Ok(pq - config.gamma * div_qq_hat(sets, &config.loss)?)
}

/// `K` noises per example for a network, or empty lists for a noise-free one.
pub fn draw_noises<R: RngCore + ?Sized>(
    config: &NetConfig,
    n: usize,
    k: usize,
    rng: &mut R,
) -> Result<Vec<Vec<Tensor>>> {
    if !config.noise_enabled {
        return Ok(alloc::vec![Vec::new(); n]);
    }
    (0..n)
        .map(|_| {
            (0..k)
                .map(|_| netgen::sample_noise(config.z_dim, rng))
                .collect()
        })
        .collect()
}

/// Candidate sets induced by fixed noises (`k` copies of `G(x)` for a
/// noise-free network).
pub fn candidates_from_noises(
    params: &NetworkParams,
    batch: &[Example],
    noises: &[Vec<Tensor>],
    k: usize,
) -> Result<Vec<CandidateSet>> {
    let mut g = Graph::new();
    let bound = params.bind(&mut g)?;
    let (y, rows_per_example) = batch_forward(&mut g, &bound, batch, noises, k)?;
    let out = g.value(y);
    let mut sets = Vec::with_capacity(batch.len());
    for n in 0..batch.len() {
        let cands = (0..k)
            .map(|j| {
                let r = if rows_per_example == 1 { n } else { n * k + j };
                Tensor::vector(out.row(r).to_vec())
            })
            .collect::<Result<Vec<_>>>()?;
        let mut set = CandidateSet::from_candidates(n, cands)?;
        if rows_per_example > 1 {
            set.noises = noises[n].clone();
        }
        sets.push(set);
    }
    Ok(sets)
}

/// Runs every (example, noise) pair as one batch. Returns the output node
/// and how many rows each example occupies (`k`, or 1 without noise).
fn batch_forward(
    g: &mut Graph,
    bound: &BoundParams,
    batch: &[Example],
    noises: &[Vec<Tensor>],
    k: usize,
) -> Result<(NodeId, usize)> {
    let cfg = bound.config().clone();
    if batch.is_empty() {
        return Err(Error::Contract("empty batch".into()));
    }
    if k == 0 {
        return Err(Error::Parameter("K must be at least 1".into()));
    }
    if let Some(ex) = batch.iter().find(|ex| ex.x.len() != cfg.x_dim) {
        return Err(Error::dim("objective x", ex.x.shape(), &[cfg.x_dim]));
    }
    if !cfg.noise_enabled {
        if noises.iter().any(|z| !z.is_empty()) {
            return Err(Error::Contract(
                "noise given to a noise-free network".into(),
            ));
        }
        let xs = batch
            .iter()
            .flat_map(|ex| ex.x.data().iter().copied())
            .collect();
        let xr = g.leaf(Tensor::matrix(batch.len(), cfg.x_dim, xs)?);
        return Ok((netgen::forward_rows(g, bound, xr, None)?, 1));
    }
    if noises.len() != batch.len() {
        return Err(Error::Contract(format!(
            "{} examples but noise for {}",
            batch.len(),
            noises.len()
        )));
    }
    let rows = batch.len() * k;
    let mut xs = Vec::with_capacity(rows * cfg.x_dim);
    let mut zs = Vec::with_capacity(rows * cfg.z_dim);
    for (ex, zn) in batch.iter().zip(noises) {
        if zn.len() != k {
            return Err(Error::Contract(format!(
                "expected {k} noises per example, got {}",
                zn.len()
            )));
        }
        for z in zn {
            if z.len() != cfg.z_dim {
                return Err(Error::dim("noise", z.shape(), &[cfg.z_dim]));
            }
            xs.extend_from_slice(ex.x.data());
            zs.extend_from_slice(z.data());
        }
    }
    let xr = g.leaf(Tensor::matrix(rows, cfg.x_dim, xs)?);
    let zr = g.leaf(Tensor::matrix(rows, cfg.z_dim, zs)?);
    Ok((netgen::forward_rows(g, bound, xr, Some(zr))?, k))
}

/// Differentiable `F̂` for one batch under fixed noises; `backward` on the
/// returned scalar gives `∂F̂/∂θ` at `bound.flat()`.
///
/// `noises[n]` holds the `config.k` noises of example `n` (empty lists for a
/// noise-free network, whose `K` candidates coincide).
pub fn disco_objective_node(
    g: &mut Graph,
    bound: &BoundParams,
    batch: &[Example],
    noises: &[Vec<Tensor>],
    config: &ObjectiveConfig,
) -> Result<NodeId> {
    config.validate()?;
    let k = config.k;
    let n = batch.len();
    let y_dim = bound.config().y_dim;
    let (y, rows_per_example) = batch_forward(g, bound, batch, noises, k)?;

    let mut targets = Vec::with_capacity(n * rows_per_example * y_dim);
    for ex in batch {
        if ex.y.len() != y_dim {
            return Err(Error::dim("objective y", ex.y.shape(), &[y_dim]));
        }
        for _ in 0..rows_per_example {
            targets.extend_from_slice(ex.y.data());
        }
    }
    let weights = config.loss.weight_tensor(y_dim)?;
    let beta = config.loss.beta();

    let t = g.leaf(Tensor::matrix(n * rows_per_example, y_dim, targets)?);
    let pq = g.row_pow_norms(t, y, &weights, beta)?;
    let pq = g.reduce_sum(pq)?;
    let pq = g.scale(pq, 1.0 / (n * rows_per_example) as f64)?;

    // Without noise every pair of candidates coincides and the diversity term is 0.
    if config.gamma == 0.0 || rows_per_example == 1 {
        return Ok(pq);
    }

    // Each unordered pair stands for both orderings, which have equal loss.
    let mut left = Vec::with_capacity(n * k * (k - 1) / 2);
    let mut right = Vec::with_capacity(left.capacity());
    for e in 0..n {
        for i in 0..k {
            for j in i + 1..k {
                left.push(e * k + i);
                right.push(e * k + j);
            }
        }
    }
    let a = g.gather_rows(y, &left)?;
    let b = g.gather_rows(y, &right)?;
    let qq = g.row_pow_norms(a, b, &weights, beta)?;
    let qq = g.reduce_sum(qq)?;
    let qq = g.scale(qq, -config.gamma * 2.0 / (n * k * (k - 1)) as f64)?;
    g.add(pq, qq)
}
