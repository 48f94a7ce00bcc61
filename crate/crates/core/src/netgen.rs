//! The generator `G(z, x; θ)`: a dense ReLU encoder over `x`, concatenation
//! with a noise sample `z`, then a dense ReLU decoder with a linear output
//! layer.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};

use crate::diff::{Graph, NodeId, Tensor};
use crate::math;
use crate::rngs::StreamRng;
use crate::{Error, Result};

/// Architecture of a generator.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NetConfig {
    pub x_dim: usize,
    pub y_dim: usize,
    /// Ignored when `noise_enabled` is false.
    pub z_dim: usize,
    pub encoder_widths: Vec<usize>,
    pub decoder_widths: Vec<usize>,
    pub noise_enabled: bool,
}

impl NetConfig {
    /// Desk-scale default: encoder `[64]`, decoder `[64, 64]`, 8 noise dims.
    pub fn desk(x_dim: usize, y_dim: usize) -> Self {
        Self {
            x_dim,
            y_dim,
            z_dim: 8,
            encoder_widths: vec![64],
            decoder_widths: vec![64, 64],
            noise_enabled: true,
        }
    }

    /// Same layout with the 200-dimensional noise used for hand pose.
    pub fn wide_noise(x_dim: usize, y_dim: usize) -> Self {
        Self {
            z_dim: 200,
            ..Self::desk(x_dim, y_dim)
        }
    }

    /// The non-probabilistic ablation of `self`: identical layers, no noise input.
    pub fn without_noise(&self) -> Self {
        Self {
            noise_enabled: false,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.x_dim == 0 || self.y_dim == 0 {
            return Err(Error::Parameter("x_dim and y_dim must be positive".into()));
        }
        if self.noise_enabled && self.z_dim == 0 {
            return Err(Error::Parameter(
                "z_dim must be positive when noise is enabled".into(),
            ));
        }
        if self
            .encoder_widths
            .iter()
            .chain(&self.decoder_widths)
            .any(|&w| w == 0)
        {
            return Err(Error::Parameter("layer widths must be positive".into()));
        }
        Ok(())
    }

    /// Noise width actually fed to the network.
    pub fn noise_dim(&self) -> usize {
        if self.noise_enabled {
            self.z_dim
        } else {
            0
        }
    }

    /// `(fan_in, fan_out)` of every layer in order.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::new();
        let mut width = self.x_dim;
        for &w in &self.encoder_widths {
            shapes.push((width, w));
            width = w;
        }
        width += self.noise_dim();
        for &w in &self.decoder_widths {
            shapes.push((width, w));
            width = w;
        }
        shapes.push((width, self.y_dim));
        shapes
    }

    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o)| i * o + o).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LayerLayout {
    fan_in: usize,
    fan_out: usize,
    weight_offset: usize,
    bias_offset: usize,
}

/// All weights and biases θ, stored as one flat vector (weight then bias,
/// layer by layer; weights row-major `[fan_in, fan_out]`).
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    config: NetConfig,
    flat: Vec<f64>,
    layout: Vec<LayerLayout>,
}

fn layout_for(config: &NetConfig) -> Vec<LayerLayout> {
    let mut offset = 0;
    config
        .layer_shapes()
        .into_iter()
        .map(|(fan_in, fan_out)| {
            let l = LayerLayout {
                fan_in,
                fan_out,
                weight_offset: offset,
                bias_offset: offset + fan_in * fan_out,
            };
            offset += fan_in * fan_out + fan_out;
            l
        })
        .collect()
}

impl NetworkParams {
    /// Glorot-uniform weights in `[−a, a]`, `a = √(6 / (fan_in + fan_out))`,
    /// and zero biases. Deterministic in `seed`.
    pub fn init(config: &NetConfig, seed: u64) -> Result<Self> {
        let mut params = Self::zeros(config)?;
        let mut rng = StreamRng::seed_from_u64(seed);
        for l in params.layout.clone() {
            let a = math::sqrt(6.0 / (l.fan_in + l.fan_out) as f64);
            for w in &mut params.flat[l.weight_offset..l.bias_offset] {
                *w = rng.random_range(-a..=a);
            }
        }
        Ok(params)
    }

    pub fn zeros(config: &NetConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config: config.clone(),
            flat: vec![0.0; config.param_count()],
            layout: layout_for(config),
        })
    }

    pub fn from_flat(config: &NetConfig, flat: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if flat.len() != config.param_count() {
            return Err(Error::dim(
                "network params",
                &[config.param_count()],
                &[flat.len()],
            ));
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("network parameters must be finite".into()));
        }
        Ok(Self {
            config: config.clone(),
            flat,
            layout: layout_for(config),
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn flat(&self) -> &[f64] {
        &self.flat
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.flat
    }

    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn layer_count(&self) -> usize {
        self.layout.len()
    }

    /// Weight matrix (row-major `[fan_in, fan_out]`) and bias of layer `i`.
    pub fn layer(&self, i: usize) -> (&[f64], &[f64]) {
        let l = self.layout[i];
        (
            &self.flat[l.weight_offset..l.bias_offset],
            &self.flat[l.bias_offset..l.bias_offset + l.fan_out],
        )
    }

    pub fn layer_shape(&self, i: usize) -> (usize, usize) {
        (self.layout[i].fan_in, self.layout[i].fan_out)
    }

    /// `true` for every weight entry, `false` for biases.
    pub fn weight_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.flat.len()];
        for l in &self.layout {
            mask[l.weight_offset..l.bias_offset]
                .iter_mut()
                .for_each(|m| *m = true);
        }
        mask
    }

    /// Places θ into `g` as one leaf, with per-layer views.
    pub fn bind(&self, g: &mut Graph) -> Result<BoundParams> {
        let flat = g.leaf(Tensor::vector(self.flat.clone())?);
        self.bind_node(g, flat)
    }

    /// Per-layer views over an existing flat parameter node.
    pub fn bind_node(&self, g: &mut Graph, flat: NodeId) -> Result<BoundParams> {
        bind_layers(&self.config, g, flat)
    }
}

/// Per-layer views over a flat parameter node, for any node with the right
/// length (e.g. the perturbed leaf of a gradient check).
pub fn bind_layers(config: &NetConfig, g: &mut Graph, flat: NodeId) -> Result<BoundParams> {
    if g.value(flat).len() != config.param_count() {
        return Err(Error::dim(
            "bind",
            &[config.param_count()],
            g.value(flat).shape(),
        ));
    }
    let mut layers = Vec::new();
    for l in layout_for(config) {
        let w = g.slice(flat, l.weight_offset, &[l.fan_in, l.fan_out])?;
        let b = g.slice(flat, l.bias_offset, &[l.fan_out])?;
        layers.push((w, b));
    }
    Ok(BoundParams {
        config: config.clone(),
        flat,
        layers,
    })
}

/// θ living inside a particular graph.
#[derive(Debug, Clone)]
pub struct BoundParams {
    config: NetConfig,
    flat: NodeId,
    layers: Vec<(NodeId, NodeId)>,
}

impl BoundParams {
    /// The flat leaf; its gradient is ∂/∂θ.
    pub fn flat(&self) -> NodeId {
        self.flat
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }
}

fn dense(g: &mut Graph, input: NodeId, layer: (NodeId, NodeId), activate: bool) -> Result<NodeId> {
    let h = g.matmul(input, layer.0)?;
    let h = g.add(h, layer.1)?;
    if activate {
        g.relu(h)
    } else {
        Ok(h)
    }
}

/// Batched forward pass: `x_rows` is `[m, x_dim]`, `z_rows` is `[m, z_dim]`
/// (or `None` for a noise-free network). Returns `[m, y_dim]`.
pub fn forward_rows(
    g: &mut Graph,
    params: &BoundParams,
    x_rows: NodeId,
    z_rows: Option<NodeId>,
) -> Result<NodeId> {
    let cfg = &params.config;
    let xv = g.value(x_rows);
    if xv.shape().len() != 2 || xv.shape()[1] != cfg.x_dim {
        return Err(Error::dim(
            "forward x",
            xv.shape(),
            &[xv.dims2().0, cfg.x_dim],
        ));
    }
    let rows = xv.shape()[0];
    match (cfg.noise_enabled, z_rows) {
        (true, Some(z)) => {
            let zv = g.value(z);
            if zv.shape() != [rows, cfg.z_dim] {
                return Err(Error::dim("forward z", zv.shape(), &[rows, cfg.z_dim]));
            }
        }
        (true, None) => return Err(Error::Contract("network expects a noise input".into())),
        (false, Some(_)) => return Err(Error::Contract("network takes no noise input".into())),
        (false, None) => {}
    }

    let n_enc = cfg.encoder_widths.len();
    let mut h = x_rows;
    for &layer in &params.layers[..n_enc] {
        h = dense(g, h, layer, true)?;
    }
    if let Some(z) = z_rows {
        h = g.concat(h, z, 1)?;
    }
    let last = params.layers.len() - 1;
    for (i, &layer) in params.layers.iter().enumerate().skip(n_enc) {
        h = dense(g, h, layer, i != last)?;
    }
    Ok(h)
}

/// Forward pass for a single input; returns a `[1, y_dim]` node.
pub fn forward(
    g: &mut Graph,
    params: &BoundParams,
    x: &Tensor,
    z: Option<&Tensor>,
) -> Result<NodeId> {
    let cfg = &params.config;
    if x.len() != cfg.x_dim {
        return Err(Error::dim("forward x", x.shape(), &[cfg.x_dim]));
    }
    if let Some(z) = z {
        if cfg.noise_enabled && z.len() != cfg.z_dim {
            return Err(Error::dim("forward z", z.shape(), &[cfg.z_dim]));
        }
    }
    let xr = g.leaf(Tensor::matrix(1, cfg.x_dim, x.data().to_vec())?);
    let zr = match z {
        Some(z) => Some(g.leaf(Tensor::matrix(1, z.len(), z.data().to_vec())?)),
        None => None,
    };
    forward_rows(g, params, xr, zr)
}

/// Evaluates `G(z, x)` without keeping a graph around.
pub fn predict(params: &NetworkParams, x: &Tensor, z: Option<&Tensor>) -> Result<Tensor> {
    let mut g = Graph::new();
    let bound = params.bind(&mut g)?;
    let y = forward(&mut g, &bound, x, z)?;
    Tensor::vector(g.value(y).data().to_vec())
}

/// A `z_dim` vector with i.i.d. Uniform[−1, 1] coordinates.
pub fn sample_noise<R: RngCore + ?Sized>(z_dim: usize, rng: &mut R) -> Result<Tensor> {
    if z_dim == 0 {
        return Err(Error::Parameter("z_dim must be positive".into()));
    }
    let data = (0..z_dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
    Tensor::vector(data)
}

/// `K` sampled outputs for one input, with the noises that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub index: usize,
    pub candidates: Vec<Tensor>,
    /// Empty for noise-free networks.
    pub noises: Vec<Tensor>,
}

impl CandidateSet {
    pub fn from_candidates(index: usize, candidates: Vec<Tensor>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::Contract(
                "a candidate set needs at least one candidate".into(),
            ));
        }
        let d = candidates[0].len();
        if let Some(c) = candidates.iter().find(|c| c.len() != d) {
            return Err(Error::dim("candidate set", &[d], c.shape()));
        }
        Ok(Self {
            index,
            candidates,
            noises: Vec::new(),
        })
    }

    /// Convenience for scalar or small fixtures: one row per candidate.
    pub fn from_rows(index: usize, rows: &[&[f64]]) -> Result<Self> {
        let cands = rows
            .iter()
            .map(|r| Tensor::vector(r.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Self::from_candidates(index, cands)
    }

    pub fn with_index(mut self, index: usize) -> Self {
        self.index = index;
        self
    }

    pub fn k(&self) -> usize {
        self.candidates.len()
    }

    pub fn y_dim(&self) -> usize {
        self.candidates[0].len()
    }
}

/// Draws `k` fresh noises and evaluates the network once per noise.
pub fn sample_candidates<R: RngCore + ?Sized>(
    params: &NetworkParams,
    x: &Tensor,
    k: usize,
    rng: &mut R,
) -> Result<CandidateSet> {
    if k == 0 {
        return Err(Error::Parameter("K must be at least 1".into()));
    }
    let cfg = params.config();
    if x.len() != cfg.x_dim {
        return Err(Error::dim("sample_candidates x", x.shape(), &[cfg.x_dim]));
    }
    if !cfg.noise_enabled {
        let y = predict(params, x, None)?;
        return CandidateSet::from_candidates(0, vec![y; k]);
    }
    let noises = (0..k)
        .map(|_| sample_noise(cfg.z_dim, rng))
        .collect::<Result<Vec<_>>>()?;
    let candidates = predict_with_noises(params, x, &noises)?;
    Ok(CandidateSet {
        index: 0,
        candidates,
        noises,
    })
}

/// `G(z_k, x)` for each given noise, evaluated as one batch.
pub fn predict_with_noises(
    params: &NetworkParams,
    x: &Tensor,
    noises: &[Tensor],
) -> Result<Vec<Tensor>> {
    let cfg = params.config();
    let k = noises.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut g = Graph::new();
    let bound = params.bind(&mut g)?;
    let mut xs = Vec::with_capacity(k * cfg.x_dim);
    let mut zs = Vec::with_capacity(k * cfg.z_dim);
    for z in noises {
        if z.len() != cfg.z_dim {
            return Err(Error::dim("noise", z.shape(), &[cfg.z_dim]));
        }
        xs.extend_from_slice(x.data());
        zs.extend_from_slice(z.data());
    }
    let xr = g.leaf(Tensor::matrix(k, cfg.x_dim, xs)?);
    let zr = g.leaf(Tensor::matrix(k, cfg.z_dim, zs)?);
    let y = forward_rows(&mut g, &bound, xr, Some(zr))?;
    let out = g.value(y);
    (0..k)
        .map(|r| Tensor::vector(out.row(r).to_vec()))
        .collect()
}

impl core::fmt::Display for NetConfig {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "{}->{:?}+z{}->{:?}->{}",
            self.x_dim,
            self.encoder_widths,
            self.noise_dim(),
            self.decoder_widths,
            self.y_dim
        )
    }
}
