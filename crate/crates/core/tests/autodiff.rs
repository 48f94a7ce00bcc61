use disco_core::diff::{analytic_gradient, numeric_gradient, Graph, NodeId, Tensor};
use disco_core::Result;
use proptest::prelude::*;

const STEP: f64 = 1e-6;
const TOL: f64 = 1e-5;

// Smooth scalar head: ‖out − far‖^1.5 with uneven weights.
fn head(g: &mut Graph, out: NodeId) -> Result<NodeId> {
    let v = g.value(out).clone();
    let far: Vec<f64> = (0..v.len()).map(|i| 10.0 + 0.37 * i as f64).collect();
    let target = g.leaf(Tensor::new(v.shape().to_vec(), far)?);
    let w: Vec<f64> = (0..v.len()).map(|i| 0.5 + 0.25 * (i % 3) as f64).collect();
    g.weighted_pow_norm(out, target, &Tensor::new(v.shape().to_vec(), w)?, 1.5)
}

// Relative error with the denominator floored at 1e-3: below that the
// central difference is mostly cancellation noise.
fn grad_check<F>(f: F, p: &Tensor, step: f64) -> Result<f64>
where
    F: Fn(&mut Graph, NodeId) -> Result<NodeId>,
{
    let a = analytic_gradient(&f, p)?;
    let n = numeric_gradient(&f, p, step)?;
    Ok(a.iter()
        .zip(&n)
        .map(|(a, n)| (a - n).abs() / (a.abs() + n.abs()).max(1e-3))
        .fold(0.0, f64::max))
}

fn entries(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

fn params(data: Vec<f64>) -> Tensor {
    Tensor::vector(data).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matmul_and_add(p in entries(6 + 6 + 2)) {
        let f = |g: &mut Graph, p: NodeId| {
            let a = g.slice(p, 0, &[2, 3])?;
            let b = g.slice(p, 6, &[3, 2])?;
            let bias = g.slice(p, 12, &[2])?;
            let m = g.matmul(a, b)?;
            let m = g.add(m, bias)?;
            head(g, m)
        };
        prop_assert!(grad_check(f, &params(p), STEP).unwrap() < TOL);
    }

    #[test]
    fn same_shape_add_and_scale(p in entries(8)) {
        let f = |g: &mut Graph, p: NodeId| {
            let a = g.slice(p, 0, &[2, 2])?;
            let b = g.slice(p, 4, &[2, 2])?;
            let s = g.add(a, b)?;
            let s = g.scale(s, -2.5)?;
            head(g, s)
        };
        prop_assert!(grad_check(f, &params(p), STEP).unwrap() < TOL);
    }

    #[test]
    fn relu_away_from_kink(p in entries(6)) {
        prop_assume!(p.iter().all(|v| v.abs() > 1e-4));
        let f = |g: &mut Graph, p: NodeId| {
            let a = g.slice(p, 0, &[2, 3])?;
            let r = g.relu(a)?;
            head(g, r)
        };
        prop_assert!(grad_check(f, &params(p), STEP).unwrap() < TOL);
    }

    #[test]
    fn concat_both_axes(p in entries(12), axis in 0usize..2) {
        let f = |g: &mut Graph, p: NodeId| {
            let a = g.slice(p, 0, &[2, 3])?;
            let b = g.slice(p, 6, &[2, 3])?;
            let c = g.concat(a, b, axis)?;
            head(g, c)
        };
        prop_assert!(grad_check(f, &params(p), STEP).unwrap() < TOL);
    }

    #[test]
    fn reductions_and_gather(p in entries(9)) {
        let f = |g: &mut Graph, p: NodeId| {
            let a = g.slice(p, 0, &[3, 3])?;
            let rows = g.gather_rows(a, &[2, 0, 2, 1])?;
            let s = g.reduce_sum(rows)?;
            let both = g.concat(rows, a, 0)?;
            let h = head(g, both)?;
            let t = g.scale(s, 0.1)?;
            let sum = g.add(h, t)?;
            Ok(sum)
        };
        prop_assert!(grad_check(f, &params(p), STEP).unwrap() < TOL);
    }

    #[test]
    fn pow_norms_away_from_coincidence(p in entries(12), beta in 0.3f64..1.9) {
        let f = |g: &mut Graph, p: NodeId| {
            let a = g.slice(p, 0, &[3, 2])?;
            let b = g.slice(p, 6, &[3, 2])?;
            let w = Tensor::vector(vec![2.0, 0.5])?;
            let rows = g.row_pow_norms(a, b, &w, beta)?;
            let rs = g.reduce_sum(rows)?;
            let whole_w = Tensor::matrix(3, 2, vec![1.0, 2.0, 0.5, 1.5, 3.0, 0.25])?;
            let whole = g.weighted_pow_norm(a, b, &whole_w, beta)?;
            g.add(rs, whole)
        };
        let close = (0..3).any(|r| {
            let d0 = p[2 * r] - p[6 + 2 * r];
            let d1 = p[2 * r + 1] - p[6 + 2 * r + 1];
            d0 * d0 + d1 * d1 < 1e-2
        });
        prop_assume!(!close);
        prop_assert!(grad_check(f, &params(p), STEP).unwrap() < TOL);
    }

    #[test]
    fn repeated_backward_is_identical(p in entries(6)) {
        let mut g = Graph::new();
        let leaf = g.leaf(params(p));
        let a = g.slice(leaf, 0, &[2, 3]).unwrap();
        let r = g.relu(a).unwrap();
        let root = head(&mut g, r).unwrap();
        let before = g.value(root).clone();
        let g1 = g.backward(root).unwrap().get(leaf).clone();
        let g2 = g.backward(root).unwrap().get(leaf).clone();
        prop_assert_eq!(g1.data(), g2.data());
        prop_assert_eq!(g.value(root), &before);
    }
}

#[test]
fn identical_construction_is_bitwise_identical() {
    let build = || {
        let mut g = Graph::new();
        let p = g.leaf(Tensor::vector((0..12).map(|i| (i as f64 * 0.7).sin()).collect()).unwrap());
        let a = g.slice(p, 0, &[3, 2]).unwrap();
        let b = g.slice(p, 6, &[2, 3]).unwrap();
        let m = g.matmul(a, b).unwrap();
        let r = g.relu(m).unwrap();
        let root = head(&mut g, r).unwrap();
        let grad = g.backward(root).unwrap().get(p).data().to_vec();
        (
            g.value(root).data()[0].to_bits(),
            grad.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        )
    };
    assert_eq!(build(), build());
}
