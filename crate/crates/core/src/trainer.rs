//! Minibatch SGD with momentum and L2 over the training objective.
//!
//! Per epoch the training set is reshuffled; per example `K` fresh noises
//! are drawn and held fixed while the batch objective is differentiated.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;

use crate::diff::Graph;
use crate::netgen::{NetConfig, NetworkParams};
use crate::objective::{self, ObjectiveConfig};
use crate::rngs::{self, StreamRng};
use crate::{Error, Example, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub objective: ObjectiveConfig,
    pub lr: f64,
    pub momentum: f64,
    /// L2 coefficient `C`, applied to weights only.
    pub l2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Master seed; init, split, shuffle and noise use named substreams of it.
    pub seed: u64,
    /// Examples held out for validation; 0 disables validation.
    pub val_count: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            objective: ObjectiveConfig::default(),
            lr: 0.01,
            momentum: 0.9,
            l2: 0.0,
            batch_size: 64,
            epochs: 100,
            seed: 0,
            val_count: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.objective.validate()?;
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::Parameter(format!(
                "learning rate must be > 0, got {}",
                self.lr
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Parameter(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.l2 >= 0.0) || !self.l2.is_finite() {
            return Err(Error::Parameter(format!(
                "l2 must be >= 0, got {}",
                self.l2
            )));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Parameter(
                "batch_size and epochs must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean objective over the epoch's batches, weighted by batch size.
    pub train_obj: f64,
    pub val_obj: Option<f64>,
    /// Wall time since training started, as reported by the observer clock.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

/// Hooks into the training loop. The defaults do nothing, and the clock
/// reads 0 so histories stay deterministic.
pub trait TrainObserver {
    fn now(&mut self) -> f64 {
        0.0
    }

    fn on_epoch(&mut self, _record: &EpochRecord, _params: &NetworkParams) -> Result<()> {
        Ok(())
    }
}

pub struct NoObserver;

impl TrainObserver for NoObserver {}

/// Disjoint, exhaustive split after a seeded shuffle; both parts keep the
/// original relative order.
pub fn train_val_split<T: Clone>(
    data: &[T],
    val_count: usize,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>)> {
    if val_count == 0 || val_count >= data.len() {
        return Err(Error::Parameter(format!(
            "validation size must lie in (0, {}), got {val_count}",
            data.len()
        )));
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut StreamRng::seed_from_u64(seed));
    let mut in_val = alloc::vec![false; data.len()];
    for &i in &idx[..val_count] {
        in_val[i] = true;
    }
    let mut train = Vec::with_capacity(data.len() - val_count);
    let mut val = Vec::with_capacity(val_count);
    for (item, v) in data.iter().zip(in_val) {
        if v {
            val.push(item.clone());
        } else {
            train.push(item.clone());
        }
    }
    Ok((train, val))
}

/// `v ← momentum·v − lr·(g + l2·θ)`, `θ ← θ + v`, with L2 on every entry.
pub fn sgd_momentum_step(
    params: &mut [f64],
    grads: &[f64],
    velocity: &mut [f64],
    lr: f64,
    momentum: f64,
    l2: f64,
) -> Result<()> {
    sgd_step(params, grads, velocity, lr, momentum, l2, None)
}

/// As [`sgd_momentum_step`], applying L2 only where `decay_mask` is true.
pub fn sgd_momentum_step_masked(
    params: &mut [f64],
    grads: &[f64],
    velocity: &mut [f64],
    lr: f64,
    momentum: f64,
    l2: f64,
    decay_mask: &[bool],
) -> Result<()> {
    sgd_step(params, grads, velocity, lr, momentum, l2, Some(decay_mask))
}

fn sgd_step(
    params: &mut [f64],
    grads: &[f64],
    velocity: &mut [f64],
    lr: f64,
    momentum: f64,
    l2: f64,
    mask: Option<&[bool]>,
) -> Result<()> {
    let n = params.len();
    if grads.len() != n || velocity.len() != n || mask.is_some_and(|m| m.len() != n) {
        return Err(Error::dim("sgd step", &[n], &[grads.len(), velocity.len()]));
    }
    for i in 0..n {
        let decay = match mask {
            Some(m) if !m[i] => 0.0,
            _ => l2 * params[i],
        };
        velocity[i] = momentum * velocity[i] - lr * (grads[i] + decay);
        params[i] += velocity[i];
    }
    Ok(())
}

/// Objective on `data` under noises from `rng`, evaluated in chunks and
/// averaged with chunk-size weights.
pub fn evaluate_objective(
    params: &NetworkParams,
    data: &[Example],
    config: &ObjectiveConfig,
    chunk: usize,
    rng: &mut StreamRng,
) -> Result<f64> {
    let mut total = 0.0;
    for part in data.chunks(chunk.max(1)) {
        let noises = objective::draw_noises(params.config(), part.len(), config.k, rng)?;
        let sets = objective::candidates_from_noises(params, part, &noises, config.k)?;
        total += objective::disco_objective(part, &sets, config)? * part.len() as f64;
    }
    Ok(total / data.len() as f64)
}

pub fn train(
    net: &NetConfig,
    config: &TrainConfig,
    data: &[Example],
) -> Result<(NetworkParams, TrainHistory)> {
    train_with(net, config, data, &mut NoObserver)
}

/// Runs the full training loop. Fully deterministic given `config.seed`.
pub fn train_with(
    net: &NetConfig,
    config: &TrainConfig,
    data: &[Example],
    observer: &mut dyn TrainObserver,
) -> Result<(NetworkParams, TrainHistory)> {
    config.validate()?;
    net.validate()?;
    if data.is_empty() {
        return Err(Error::Contract("no training data".into()));
    }
    let (train, val) = if config.val_count == 0 {
        (data.to_vec(), Vec::new())
    } else {
        train_val_split(
            data,
            config.val_count,
            rngs::derive_seed(config.seed, "split"),
        )?
    };

    let mut params = NetworkParams::init(net, rngs::derive_seed(config.seed, "init"))?;
    let mask = params.weight_mask();
    let mut velocity = alloc::vec![0.0; params.len()];
    let mut shuffle_rng = rngs::stream(config.seed, "shuffle");
    let mut noise_rng = rngs::stream(config.seed, "noise");
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = TrainHistory::default();
    let start = observer.now();
    let k = config.objective.k;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for (b, idx) in order.chunks(config.batch_size).enumerate() {
            let diverged = || Error::Diverged { epoch, batch: b };
            let batch: Vec<Example> = idx.iter().map(|&i| train[i].clone()).collect();
            let noises = objective::draw_noises(net, batch.len(), k, &mut noise_rng)?;
            let mut g = Graph::new();
            let bound = params.bind(&mut g)?;
            let root = match objective::disco_objective_node(
                &mut g,
                &bound,
                &batch,
                &noises,
                &config.objective,
            ) {
                Err(Error::Numeric(_)) => return Err(diverged()),
                r => r?,
            };
            let value = g.value(root).data()[0];
            let grads = g.backward(root)?;
            let grad = grads.get(bound.flat()).data();
            if !value.is_finite() || grad.iter().any(|v| !v.is_finite()) {
                return Err(diverged());
            }
            sgd_momentum_step_masked(
                params.flat_mut(),
                grad,
                &mut velocity,
                config.lr,
                config.momentum,
                config.l2,
                &mask,
            )?;
            if params.flat().iter().any(|v| !v.is_finite()) {
                return Err(diverged());
            }
            total += value * batch.len() as f64;
        }
        let val_obj = if val.is_empty() {
            None
        } else {
            let mut rng = rngs::indexed_stream(config.seed, "val-noise", epoch as u64);
            Some(evaluate_objective(
                &params,
                &val,
                &config.objective,
                config.batch_size,
                &mut rng,
            )?)
        };
        let record = EpochRecord {
            epoch,
            train_obj: total / train.len() as f64,
            val_obj,
            seconds: observer.now() - start,
        };
        observer.on_epoch(&record, &params)?;
        history.epochs.push(record);
    }
    Ok((params, history))
}
