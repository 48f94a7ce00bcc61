use disco_core::metrics::{
    ff, joint_errors, majee, mejee, meu_predict, pearson_matrix, JointLayout,
};
use disco_core::{CandidateSet, LossSpec, Tensor};
use proptest::prelude::*;

fn grid_set() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..=8)
        .prop_flat_map(|k| prop::collection::vec(prop::collection::vec(-2i32..=2, 2), k))
        .prop_map(|rows| {
            rows.into_iter()
                .map(|r| r.into_iter().map(f64::from).collect())
                .collect()
        })
}

fn set_of(rows: &[Vec<f64>]) -> CandidateSet {
    let r: Vec<&[f64]> = rows.iter().map(|v| v.as_slice()).collect();
    CandidateSet::from_rows(0, &r).unwrap()
}

fn brute_force(rows: &[Vec<f64>], loss: &LossSpec) -> usize {
    let sums: Vec<f64> = rows
        .iter()
        .map(|a| rows.iter().map(|b| loss.eval(a, b).unwrap()).sum())
        .collect();
    let mut best = 0;
    for (i, s) in sums.iter().enumerate() {
        if *s < sums[best] {
            best = i;
        }
    }
    best
}

proptest! {
    #[test]
    fn meu_matches_exhaustive_search(rows in grid_set(), beta in prop::sample::select(vec![0.5, 1.0, 1.5])) {
        let loss = LossSpec::euclidean(beta).unwrap();
        let (idx, y) = meu_predict(&set_of(&rows), &loss).unwrap();
        prop_assert_eq!(idx, brute_force(&rows, &loss));
        prop_assert_eq!(y.data(), rows[idx].as_slice());
    }

    // Power-of-four weights scale every pairwise loss exactly, ties included.
    #[test]
    fn meu_ignores_exact_loss_scale(rows in grid_set(), e in -6i32..=6) {
        let w = 4f64.powi(e);
        let plain = LossSpec::euclidean(1.0).unwrap();
        let scaled = LossSpec::new(1.0, vec![w, w]).unwrap();
        let set = set_of(&rows);
        prop_assert_eq!(meu_predict(&set, &plain).unwrap().0, meu_predict(&set, &scaled).unwrap().0);
    }

    #[test]
    fn meu_ignores_generic_loss_scale(
        rows in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 2..=8),
        w in 0.01f64..100.0,
    ) {
        let plain = LossSpec::euclidean(1.0).unwrap();
        let mut sums: Vec<f64> = rows.iter().map(|a| rows.iter().map(|b| plain.eval(a, b).unwrap()).sum()).collect();
        sums.sort_by(f64::total_cmp);
        prop_assume!(sums[1] - sums[0] > 1e-9 * sums[1]);
        let scaled = LossSpec::new(1.0, vec![w, w]).unwrap();
        let set = set_of(&rows);
        prop_assert_eq!(meu_predict(&set, &plain).unwrap().0, meu_predict(&set, &scaled).unwrap().0);
    }

    #[test]
    fn frame_errors_and_ff_curve(
        frames in prop::collection::vec((prop::collection::vec(-3.0f64..3.0, 9), prop::collection::vec(-3.0f64..3.0, 9)), 1..20),
    ) {
        let layout = JointLayout::pose(3);
        let preds: Vec<Tensor> = frames.iter().map(|f| Tensor::vector(f.0.clone()).unwrap()).collect();
        let gts: Vec<Tensor> = frames.iter().map(|f| Tensor::vector(f.1.clone()).unwrap()).collect();
        for (p, g) in preds.iter().zip(&gts) {
            let me = mejee(&[p.clone()], &[g.clone()], &layout).unwrap().mean;
            let ma = majee(&[p.clone()], &[g.clone()], &layout).unwrap().mean;
            prop_assert!(me <= ma);
            let errs = joint_errors(p.data(), g.data(), &layout).unwrap();
            prop_assert_eq!(ma, errs.iter().cloned().fold(0.0, f64::max));
        }
        prop_assert!(mejee(&preds, &gts, &layout).unwrap().mean <= majee(&preds, &gts, &layout).unwrap().mean);
        let mut last = 0.0;
        for d in [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 20.0] {
            let f = ff(&preds, &gts, &layout, d).unwrap();
            prop_assert!((0.0..=1.0).contains(&f) && f >= last);
            last = f;
        }
        prop_assert_eq!(last, 1.0);
    }
}

#[test]
fn pearson_diagonal_and_undefined_joints() {
    let layout = JointLayout::pose(3);
    // joint 2 never moves
    let rows = [
        vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 5.0, 5.0, 5.0],
        vec![1.0, 0.5, 0.0, 2.0, 0.0, 1.0, 5.0, 5.0, 5.0],
        vec![3.0, 0.0, 1.0, 1.5, 1.5, 0.0, 5.0, 5.0, 5.0],
        vec![-1.0, 2.0, 0.0, 1.0, 4.0, 2.0, 5.0, 5.0, 5.0],
    ];
    let m = pearson_matrix(&[set_of(&rows), set_of(&rows)], &layout).unwrap();
    assert_eq!(m.get(0, 0), Some(1.0));
    assert_eq!(m.get(1, 1), Some(1.0));
    assert_eq!(m.get(2, 2), None);
    assert_eq!(m.get(0, 2), None);
    assert_eq!(m.get(0, 1), m.get(1, 0));
    let r = m.get(0, 1).unwrap();
    assert!((-1.0..=1.0).contains(&r));
}
