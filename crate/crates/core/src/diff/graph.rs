use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{Tensor, SINGULARITY_EPS};
use crate::math;
use crate::{Error, Result};

/// Handle to a node of one [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Relu(NodeId),
    Concat { a: NodeId, b: NodeId, axis: usize },
    ReduceSum(NodeId),
    Scale(NodeId, f64),
    PowNorm(PowNorm),
    RowPowNorms(PowNorm),
    GatherRows { a: NodeId, rows: Vec<usize> },
    Slice { a: NodeId, offset: usize },
}

#[derive(Debug, Clone)]
struct PowNorm {
    a: NodeId,
    b: NodeId,
    weights: Vec<f64>,
    beta: f64,
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Tensor,
}

/// Append-only computation tape.
#[derive(Debug, Clone, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradient of a scalar root with respect to every node of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    grads: Vec<Tensor>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> &Tensor {
        &self.grads[id.0]
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }
}

fn check_pow_norm_params(weights: &[f64], beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 2.0) {
        return Err(Error::Parameter(format!(
            "beta must lie in (0, 2), got {beta}"
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
        return Err(Error::Parameter(format!(
            "loss weights must be finite and >= 0, got {w}"
        )));
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::Parameter("loss weights must not all be zero".into()));
    }
    Ok(())
}

#[inline]
fn weighted_sq(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(w)
        .map(|((x, y), w)| {
            let d = x - y;
            w * d * d
        })
        .sum()
}

fn finite(op: &'static str, data: Vec<f64>, shape: Vec<usize>) -> Result<Tensor> {
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("{op} produced a non-finite value")));
    }
    Ok(Tensor::from_raw(shape, data))
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    fn check_id(&self, id: NodeId) -> Result<()> {
        if id.0 >= self.nodes.len() {
            return Err(Error::Contract(format!("node {} does not exist", id.0)));
        }
        Ok(())
    }

    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value)
    }

    /// `[m, k] × [k, n] → [m, n]`.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check_id(a)?;
        self.check_id(b)?;
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape().len() != 2 || bv.shape().len() != 2 || av.shape()[1] != bv.shape()[0] {
            return Err(Error::dim("matmul", av.shape(), bv.shape()));
        }
        let (m, k) = av.dims2();
        let n = bv.shape()[1];
        let out = matmul_raw(av.data(), bv.data(), m, k, n);
        let value = finite("matmul", out, vec![m, n])?;
        Ok(self.push(Op::MatMul(a, b), value))
    }

    /// Elementwise sum. `b` may also be a bias of length `cols(a)`, which is
    /// added to every row of `a`.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check_id(a)?;
        self.check_id(b)?;
        let (av, bv) = (self.value(a), self.value(b));
        let data: Vec<f64> = if av.shape() == bv.shape() {
            av.data()
                .iter()
                .zip(bv.data())
                .map(|(x, y)| x + y)
                .collect()
        } else {
            let (_, cols) = av.dims2();
            let bias_like = bv.len() == cols && bv.dims2().0 == 1 && av.shape().len() == 2;
            if !bias_like {
                return Err(Error::dim("add", av.shape(), bv.shape()));
            }
            av.data()
                .chunks(cols)
                .flat_map(|row| row.iter().zip(bv.data()).map(|(x, y)| x + y))
                .collect()
        };
        let value = finite("add", data, av.shape().to_vec())?;
        Ok(self.push(Op::Add(a, b), value))
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        self.check_id(a)?;
        let av = self.value(a);
        let data = av
            .data()
            .iter()
            .map(|&x| if x > 0.0 { x } else { 0.0 })
            .collect();
        let value = Tensor::from_raw(av.shape().to_vec(), data);
        Ok(self.push(Op::Relu(a), value))
    }

    /// Concatenates along `axis`; all other dimensions must agree.
    pub fn concat(&mut self, a: NodeId, b: NodeId, axis: usize) -> Result<NodeId> {
        self.check_id(a)?;
        self.check_id(b)?;
        let (av, bv) = (self.value(a), self.value(b));
        let (sa, sb) = (av.shape(), bv.shape());
        let mismatch = || Error::dim("concat", sa, sb);
        if sa.len() != sb.len() || axis >= sa.len() {
            return Err(mismatch());
        }
        let value = match (sa.len(), axis) {
            (1, 0) => {
                let mut d = av.data().to_vec();
                d.extend_from_slice(bv.data());
                Tensor::from_raw(vec![sa[0] + sb[0]], d)
            }
            (2, 0) => {
                if sa[1] != sb[1] {
                    return Err(mismatch());
                }
                let mut d = av.data().to_vec();
                d.extend_from_slice(bv.data());
                Tensor::from_raw(vec![sa[0] + sb[0], sa[1]], d)
            }
            (2, 1) => {
                if sa[0] != sb[0] {
                    return Err(mismatch());
                }
                let mut d = Vec::with_capacity(av.len() + bv.len());
                for r in 0..sa[0] {
                    d.extend_from_slice(av.row(r));
                    d.extend_from_slice(bv.row(r));
                }
                Tensor::from_raw(vec![sa[0], sa[1] + sb[1]], d)
            }
            _ => return Err(mismatch()),
        };
        Ok(self.push(Op::Concat { a, b, axis }, value))
    }

    pub fn reduce_sum(&mut self, a: NodeId) -> Result<NodeId> {
        self.check_id(a)?;
        let s: f64 = self.value(a).data().iter().sum();
        let value = finite("reduce_sum", vec![s], vec![1])?;
        Ok(self.push(Op::ReduceSum(a), value))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        self.check_id(a)?;
        if !c.is_finite() {
            return Err(Error::Parameter(format!(
                "scale factor must be finite, got {c}"
            )));
        }
        let av = self.value(a);
        let data = av.data().iter().map(|x| c * x).collect();
        let value = finite("scale", data, av.shape().to_vec())?;
        Ok(self.push(Op::Scale(a, c), value))
    }

    /// Scalar `(Σ_i w_i (a_i − b_i)²)^{β/2}` over all entries of `a` and `b`.
    pub fn weighted_pow_norm(
        &mut self,
        a: NodeId,
        b: NodeId,
        weights: &Tensor,
        beta: f64,
    ) -> Result<NodeId> {
        self.check_id(a)?;
        self.check_id(b)?;
        check_pow_norm_params(weights.data(), beta)?;
        let (av, bv) = (self.value(a), self.value(b));
        if av.len() != bv.len() || weights.len() != av.len() {
            return Err(Error::dim("weighted_pow_norm", av.shape(), bv.shape()));
        }
        let s = weighted_sq(av.data(), bv.data(), weights.data());
        let value = finite(
            "weighted_pow_norm",
            vec![math::powf(s, beta / 2.0)],
            vec![1],
        )?;
        let op = Op::PowNorm(PowNorm {
            a,
            b,
            weights: weights.data().to_vec(),
            beta,
        });
        Ok(self.push(op, value))
    }

    /// Row-wise weighted β-norms of `a − b` for `[m, d]` inputs, giving `[m]`.
    pub fn row_pow_norms(
        &mut self,
        a: NodeId,
        b: NodeId,
        weights: &Tensor,
        beta: f64,
    ) -> Result<NodeId> {
        self.check_id(a)?;
        self.check_id(b)?;
        check_pow_norm_params(weights.data(), beta)?;
        let (av, bv) = (self.value(a), self.value(b));
        let (m, d) = av.dims2();
        if av.shape() != bv.shape() || weights.len() != d {
            return Err(Error::dim("row_pow_norms", av.shape(), bv.shape()));
        }
        let w = weights.data();
        let data = (0..m)
            .map(|r| math::powf(weighted_sq(av.row(r), bv.row(r), w), beta / 2.0))
            .collect();
        let value = finite("row_pow_norms", data, vec![m])?;
        let op = Op::RowPowNorms(PowNorm {
            a,
            b,
            weights: w.to_vec(),
            beta,
        });
        Ok(self.push(op, value))
    }

    /// Selects rows of a matrix (repetition allowed) into a new `[len, d]` matrix.
    pub fn gather_rows(&mut self, a: NodeId, rows: &[usize]) -> Result<NodeId> {
        self.check_id(a)?;
        let av = self.value(a);
        let (m, d) = av.dims2();
        if rows.is_empty() {
            return Err(Error::Contract("gather_rows needs at least one row".into()));
        }
        if let Some(&r) = rows.iter().find(|&&r| r >= m) {
            return Err(Error::Contract(format!(
                "row {r} out of range for {m} rows"
            )));
        }
        let mut data = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            data.extend_from_slice(av.row(r));
        }
        let value = Tensor::from_raw(vec![rows.len(), d], data);
        let op = Op::GatherRows {
            a,
            rows: rows.to_vec(),
        };
        Ok(self.push(op, value))
    }

    /// Contiguous slice of the flat data of `a`, starting at `offset`,
    /// reinterpreted with `shape`.
    pub fn slice(&mut self, a: NodeId, offset: usize, shape: &[usize]) -> Result<NodeId> {
        self.check_id(a)?;
        let av = self.value(a);
        let numel: usize = shape.iter().product();
        if offset + numel > av.len() {
            return Err(Error::dim("slice", av.shape(), shape));
        }
        let value = Tensor::new(shape.to_vec(), av.data()[offset..offset + numel].to_vec())?;
        Ok(self.push(Op::Slice { a, offset }, value))
    }

    /// Reverse sweep from a scalar `root`. Nodes the root does not depend on
    /// get a zero gradient.
    pub fn backward(&self, root: NodeId) -> Result<Gradients> {
        self.check_id(root)?;
        if !self.value(root).is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar root, got shape {:?}",
                self.value(root).shape()
            )));
        }
        let mut grads: Vec<Vec<f64>> = Vec::with_capacity(root.0 + 1);
        let mut reached = vec![false; root.0 + 1];
        for node in &self.nodes[..=root.0] {
            grads.push(vec![0.0; node.value.len()]);
        }
        grads[root.0][0] = 1.0;
        reached[root.0] = true;

        for i in (0..=root.0).rev() {
            if !reached[i] {
                continue;
            }
            let node = &self.nodes[i];
            let upstream = core::mem::take(&mut grads[i]);
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let (m, k) = av.dims2();
                    let n = bv.shape()[1];
                    // dA = dC · Bᵀ
                    let ga = &mut grads[a.0];
                    for r in 0..m {
                        for c in 0..k {
                            let mut s = 0.0;
                            for j in 0..n {
                                s += upstream[r * n + j] * bv.data()[c * n + j];
                            }
                            ga[r * k + c] += s;
                        }
                    }
                    reached[a.0] = true;
                    // dB = Aᵀ · dC
                    let gb = &mut grads[b.0];
                    for r in 0..m {
                        for c in 0..k {
                            let x = av.data()[r * k + c];
                            if x == 0.0 {
                                continue;
                            }
                            let row = &upstream[r * n..(r + 1) * n];
                            for (g, u) in gb[c * n..(c + 1) * n].iter_mut().zip(row) {
                                *g += x * u;
                            }
                        }
                    }
                    reached[b.0] = true;
                }
                Op::Add(a, b) => {
                    for (g, u) in grads[a.0].iter_mut().zip(&upstream) {
                        *g += u;
                    }
                    reached[a.0] = true;
                    let bl = grads[b.0].len();
                    if bl == upstream.len() {
                        for (g, u) in grads[b.0].iter_mut().zip(&upstream) {
                            *g += u;
                        }
                    } else {
                        for row in upstream.chunks(bl) {
                            for (g, u) in grads[b.0].iter_mut().zip(row) {
                                *g += u;
                            }
                        }
                    }
                    reached[b.0] = true;
                }
                Op::Relu(a) => {
                    let av = self.value(*a);
                    for ((g, u), x) in grads[a.0].iter_mut().zip(&upstream).zip(av.data()) {
                        if *x > 0.0 {
                            *g += u;
                        }
                    }
                    reached[a.0] = true;
                }
                Op::Concat { a, b, axis } => {
                    let (al, bl) = (self.value(*a).len(), self.value(*b).len());
                    if *axis == 0 {
                        add_into(&mut grads[a.0], &upstream[..al]);
                        add_into(&mut grads[b.0], &upstream[al..]);
                    } else {
                        let (rows, ac) = self.value(*a).dims2();
                        let bc = bl / rows;
                        for r in 0..rows {
                            let base = r * (ac + bc);
                            add_into(
                                &mut grads[a.0][r * ac..(r + 1) * ac],
                                &upstream[base..base + ac],
                            );
                            add_into(
                                &mut grads[b.0][r * bc..(r + 1) * bc],
                                &upstream[base + ac..base + ac + bc],
                            );
                        }
                    }
                    reached[a.0] = true;
                    reached[b.0] = true;
                }
                Op::ReduceSum(a) => {
                    let u = upstream[0];
                    for g in grads[a.0].iter_mut() {
                        *g += u;
                    }
                    reached[a.0] = true;
                }
                Op::Scale(a, c) => {
                    for (g, u) in grads[a.0].iter_mut().zip(&upstream) {
                        *g += c * u;
                    }
                    reached[a.0] = true;
                }
                Op::PowNorm(p) => {
                    let (av, bv) = (self.value(p.a), self.value(p.b));
                    let n = av.len();
                    let mut gb = vec![0.0; n];
                    pow_norm_grad_b(
                        av.data(),
                        bv.data(),
                        &p.weights,
                        p.beta,
                        upstream[0],
                        &mut gb,
                    );
                    for (i, g) in gb.iter().enumerate() {
                        grads[p.b.0][i] += g;
                        grads[p.a.0][i] -= g;
                    }
                    reached[p.a.0] = true;
                    reached[p.b.0] = true;
                }
                Op::RowPowNorms(p) => {
                    let (av, bv) = (self.value(p.a), self.value(p.b));
                    let (m, d) = av.dims2();
                    let mut gb = vec![0.0; d];
                    for (r, &u) in upstream.iter().enumerate().take(m) {
                        gb.iter_mut().for_each(|g| *g = 0.0);
                        pow_norm_grad_b(av.row(r), bv.row(r), &p.weights, p.beta, u, &mut gb);
                        for (c, g) in gb.iter().enumerate() {
                            grads[p.b.0][r * d + c] += g;
                            grads[p.a.0][r * d + c] -= g;
                        }
                    }
                    reached[p.a.0] = true;
                    reached[p.b.0] = true;
                }
                Op::GatherRows { a, rows } => {
                    let d = self.value(*a).dims2().1;
                    for (i, &r) in rows.iter().enumerate() {
                        add_into(
                            &mut grads[a.0][r * d..(r + 1) * d],
                            &upstream[i * d..(i + 1) * d],
                        );
                    }
                    reached[a.0] = true;
                }
                Op::Slice { a, offset } => {
                    let n = upstream.len();
                    add_into(&mut grads[a.0][*offset..*offset + n], &upstream);
                    reached[a.0] = true;
                }
            }
            grads[i] = upstream;
        }

        let mut out: Vec<Tensor> = grads
            .into_iter()
            .zip(&self.nodes)
            .map(|(g, n)| Tensor::from_raw(n.value.shape().to_vec(), g))
            .collect();
        for node in &self.nodes[root.0 + 1..] {
            out.push(Tensor::zeros(node.value.shape()));
        }
        Ok(Gradients { grads: out })
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Accumulates `upstream · ∂/∂b (Σ w (a − b)²)^{β/2}` into `out`.
fn pow_norm_grad_b(a: &[f64], b: &[f64], w: &[f64], beta: f64, upstream: f64, out: &mut [f64]) {
    let s = weighted_sq(a, b, w);
    if s < SINGULARITY_EPS || upstream == 0.0 {
        return;
    }
    let coef = upstream * beta * math::powf(s, beta / 2.0 - 1.0);
    for i in 0..a.len() {
        out[i] += coef * w[i] * (b[i] - a[i]);
    }
}

/// Row-major `[m, k] × [k, n]`. Each output entry accumulates over `k` in
/// ascending order regardless of `m`, so a row computes identically whether
/// it is evaluated alone or inside a batch.
pub(crate) fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for r in 0..m {
        let orow = &mut out[r * n..(r + 1) * n];
        for c in 0..k {
            let x = a[r * k + c];
            let brow = &b[c * n..(c + 1) * n];
            for (o, y) in orow.iter_mut().zip(brow) {
                *o += x * y;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_small_and_identity() {
        let mut g = Graph::new();
        let a = g.leaf(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]));
        let ones = g.leaf(t(&[2, 1], &[1.0, 1.0]));
        let p = g.matmul(a, ones).unwrap();
        assert_eq!(g.value(p).data(), &[3.0, 7.0]);
        assert_eq!(g.value(p).shape(), &[2, 1]);
        let id = g.leaf(t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]));
        let q = g.matmul(a, id).unwrap();
        assert_eq!(g.value(q), g.value(a));
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut g = Graph::new();
        let a = g.leaf(t(&[2, 3], &[0.0; 6]));
        let b = g.leaf(t(&[2, 3], &[0.0; 6]));
        match g.matmul(a, b) {
            Err(Error::Dimension { lhs, rhs, .. }) => {
                assert_eq!(lhs, [2, 3]);
                assert_eq!(rhs, [2, 3]);
            }
            other => panic!("expected dimension error, got {other:?}"),
        }
    }

    #[test]
    fn relu_and_concat_forward() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[3], &[-1.0, 0.0, 2.0]));
        let r = g.relu(x).unwrap();
        assert_eq!(g.value(r).data(), &[0.0, 0.0, 2.0]);
        let a = g.leaf(t(&[2], &[1.0, 2.0]));
        let b = g.leaf(t(&[1], &[3.0]));
        let c = g.concat(a, b, 0).unwrap();
        assert_eq!(g.value(c).data(), &[1.0, 2.0, 3.0]);
        let m1 = g.leaf(t(&[2, 1], &[1.0, 2.0]));
        let m2 = g.leaf(t(&[2, 2], &[3.0, 4.0, 5.0, 6.0]));
        let c2 = g.concat(m1, m2, 1).unwrap();
        assert_eq!(g.value(c2).data(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
        assert!(g.concat(m1, m2, 0).is_err());
    }

    #[test]
    fn add_broadcasts_bias_rows() {
        let mut g = Graph::new();
        let a = g.leaf(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]));
        let b = g.leaf(t(&[2], &[10.0, 20.0]));
        let s = g.add(a, b).unwrap();
        assert_eq!(g.value(s).data(), &[11.0, 22.0, 13.0, 24.0]);
        let root = g.reduce_sum(s).unwrap();
        let grads = g.backward(root).unwrap();
        assert_eq!(grads.get(b).data(), &[2.0, 2.0]);
        let bad = g.leaf(t(&[3], &[0.0; 3]));
        assert!(g.add(a, bad).is_err());
    }

    #[test]
    fn relu_gradient_at_kink_is_zero() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[3], &[-1.0, 0.0, 2.0]));
        let r = g.relu(x).unwrap();
        let s = g.reduce_sum(r).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(x).data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn pow_norm_values() {
        let mut g = Graph::new();
        let a = g.leaf(t(&[2], &[0.0, 0.0]));
        let b = g.leaf(t(&[2], &[3.0, 4.0]));
        let n = g
            .weighted_pow_norm(a, b, &t(&[2], &[1.0, 1.0]), 1.0)
            .unwrap();
        assert_eq!(g.value(n).data(), &[5.0]);

        let c = g.leaf(t(&[2], &[1.0, 1.0]));
        let n2 = g
            .weighted_pow_norm(a, c, &t(&[2], &[10.0, 0.1]), 1.0)
            .unwrap();
        assert!((g.value(n2).data()[0] - 10.1f64.sqrt()).abs() < 1e-12);
        assert!((g.value(n2).data()[0] - 3.17805).abs() < 1e-5);
    }

    #[test]
    fn pow_norm_coincident_points_have_zero_gradient() {
        let mut g = Graph::new();
        let a = g.leaf(t(&[2], &[1.5, -2.0]));
        let b = g.leaf(t(&[2], &[1.5, -2.0]));
        let n = g
            .weighted_pow_norm(a, b, &t(&[2], &[1.0, 1.0]), 1.0)
            .unwrap();
        assert_eq!(g.value(n).data(), &[0.0]);
        let grads = g.backward(n).unwrap();
        assert_eq!(grads.get(a).data(), &[0.0, 0.0]);
        assert_eq!(grads.get(b).data(), &[0.0, 0.0]);
    }

    #[test]
    fn pow_norm_rejects_bad_parameters() {
        let mut g = Graph::new();
        let a = g.leaf(t(&[2], &[0.0, 0.0]));
        let b = g.leaf(t(&[2], &[1.0, 0.0]));
        let w = t(&[2], &[1.0, 1.0]);
        for beta in [0.0, 2.0, -1.0, 2.5, f64::NAN] {
            assert!(matches!(
                g.weighted_pow_norm(a, b, &w, beta),
                Err(Error::Parameter(_))
            ));
        }
        assert!(matches!(
            g.weighted_pow_norm(a, b, &t(&[2], &[1.0, -0.5]), 1.0),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            g.weighted_pow_norm(a, b, &t(&[2], &[0.0, 0.0]), 1.0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn backward_scale_and_diamond() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[1], &[2.0]));
        let s = g.scale(x, 3.0).unwrap();
        assert_eq!(g.backward(s).unwrap().get(x).data(), &[3.0]);

        // x feeds both branches: d(3x + 5x)/dx = 8
        let a = g.scale(x, 3.0).unwrap();
        let b = g.scale(x, 5.0).unwrap();
        let sum = g.add(a, b).unwrap();
        let grads = g.backward(sum).unwrap();
        assert_eq!(grads.get(x).data(), &[8.0]);
        // s is not an ancestor of `sum`
        assert_eq!(grads.get(s).data(), &[0.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_root() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[2], &[1.0, 2.0]));
        assert!(matches!(g.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn gradient_shapes_match_values_and_repeat() {
        let mut g = Graph::new();
        let a = g.leaf(t(&[2, 3], &[0.1, -0.2, 0.3, 0.4, 0.5, -0.6]));
        let b = g.leaf(t(&[3, 2], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let p = g.matmul(a, b).unwrap();
        let r = g.relu(p).unwrap();
        let late = g.leaf(t(&[4], &[1.0; 4]));
        let root = g.reduce_sum(r).unwrap();
        let g1 = g.backward(root).unwrap();
        let g2 = g.backward(root).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(g1.len(), g.len());
        for id in [a, b, p, r, late, root] {
            assert_eq!(g1.get(id).shape(), g.value(id).shape());
        }
    }

    #[test]
    fn gather_and_slice_route_gradients() {
        let mut g = Graph::new();
        let flat = g.leaf(t(&[6], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let m = g.slice(flat, 2, &[2, 2]).unwrap();
        assert_eq!(g.value(m).data(), &[3.0, 4.0, 5.0, 6.0]);
        let rows = g.gather_rows(m, &[1, 1, 0]).unwrap();
        assert_eq!(g.value(rows).data(), &[5.0, 6.0, 5.0, 6.0, 3.0, 4.0]);
        let s = g.reduce_sum(rows).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(flat).data(), &[0.0, 0.0, 1.0, 1.0, 2.0, 2.0]);
        assert!(g.gather_rows(m, &[2]).is_err());
        assert!(g.slice(flat, 4, &[3]).is_err());
    }
}
