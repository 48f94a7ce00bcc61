use alloc::format;
use alloc::vec::Vec;

use super::{Graph, NodeId, Tensor};
use crate::math;
use crate::{Error, Result};

fn evaluate<F>(f: &F, params: &Tensor) -> Result<f64>
where
    F: Fn(&mut Graph, NodeId) -> Result<NodeId>,
{
    let mut g = Graph::new();
    let p = g.leaf(params.clone());
    let root = f(&mut g, p)?;
    let v = g.value(root);
    if !v.is_scalar() {
        return Err(Error::Contract("objective must be scalar".into()));
    }
    Ok(v.data()[0])
}

/// Gradient of the scalar built by `f` with respect to its parameter leaf.
pub fn analytic_gradient<F>(f: &F, params: &Tensor) -> Result<Vec<f64>>
where
    F: Fn(&mut Graph, NodeId) -> Result<NodeId>,
{
    let mut g = Graph::new();
    let p = g.leaf(params.clone());
    let root = f(&mut g, p)?;
    let grads = g.backward(root)?;
    Ok(grads.get(p).data().to_vec())
}

/// Central differences `(f(p + h e_i) − f(p − h e_i)) / 2h` per coordinate.
pub fn numeric_gradient<F>(f: &F, params: &Tensor, step: f64) -> Result<Vec<f64>>
where
    F: Fn(&mut Graph, NodeId) -> Result<NodeId>,
{
    if !(step > 0.0) {
        return Err(Error::Parameter(format!(
            "finite-difference step must be > 0, got {step}"
        )));
    }
    let shape = params.shape().to_vec();
    let base = params.data().to_vec();
    let mut out = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let mut plus = base.clone();
        plus[i] += step;
        let mut minus = base.clone();
        minus[i] -= step;
        let fp = perturbed(f, &shape, plus, i)?;
        let fm = perturbed(f, &shape, minus, i)?;
        out.push((fp - fm) / (2.0 * step));
    }
    Ok(out)
}

fn perturbed<F>(f: &F, shape: &[usize], data: Vec<f64>, coord: usize) -> Result<f64>
where
    F: Fn(&mut Graph, NodeId) -> Result<NodeId>,
{
    let non_finite = || {
        Error::Numeric(format!(
            "objective not finite when perturbing coordinate {coord}"
        ))
    };
    let t = Tensor::new(shape.to_vec(), data).map_err(|_| non_finite())?;
    match evaluate(f, &t) {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) | Err(Error::Numeric(_)) => Err(non_finite()),
        Err(e) => Err(e),
    }
}

/// Max over coordinates of `|a − n| / max(1e-8, |a| + |n|)`.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| {
            let denom = (math::abs(*a) + math::abs(*n)).max(1e-8);
            math::abs(a - n) / denom
        })
        .fold(0.0, f64::max)
}

/// Compares reverse-mode gradients of `f` against central differences and
/// returns the maximum relative error.
///
/// `f` receives a fresh graph and the node holding `params`, and must return
/// a scalar node. It has to be deterministic in `params`.
pub fn grad_check<F>(f: F, params: &Tensor, step: f64) -> Result<f64>
where
    F: Fn(&mut Graph, NodeId) -> Result<NodeId>,
{
    let numeric = numeric_gradient(&f, params, step)?;
    let analytic = analytic_gradient(&f, params)?;
    Ok(relative_error(&analytic, &numeric))
}
