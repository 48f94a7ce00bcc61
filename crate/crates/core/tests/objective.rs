use disco_core::netgen::{self, NetworkParams};
use disco_core::objective::{
    candidates_from_noises, disco_objective, disco_objective_node, div_pq_hat, div_qq_hat,
    draw_noises,
};
use disco_core::rngs::StreamRng;
use disco_core::scoring::{energy_score_sample, expected_loss, DiscreteDistribution};
use disco_core::{
    CandidateSet, Error, Example, Graph, LossSpec, MeanSem, NetConfig, ObjectiveConfig, Tensor,
};
use rand::{Rng, SeedableRng};

fn small_net() -> NetConfig {
    NetConfig {
        x_dim: 2,
        y_dim: 2,
        z_dim: 3,
        encoder_widths: vec![5],
        decoder_widths: vec![6],
        noise_enabled: true,
    }
}

fn batch(n: usize, rng: &mut StreamRng) -> Vec<Example> {
    (0..n)
        .map(|_| {
            let x = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
            Example::new(Tensor::vector(x).unwrap(), Tensor::vector(y).unwrap())
        })
        .collect()
}

#[test]
fn graph_objective_matches_direct_evaluation() {
    let mut rng = StreamRng::seed_from_u64(4);
    let params = NetworkParams::init(&small_net(), 9).unwrap();
    let data = batch(5, &mut rng);
    for gamma in [0.0, 0.3, 0.5] {
        for beta in [0.5, 1.0, 1.5] {
            let config =
                ObjectiveConfig::new(gamma, 4, LossSpec::new(beta, vec![1.0, 2.0]).unwrap())
                    .unwrap();
            let noises = draw_noises(params.config(), data.len(), 4, &mut rng).unwrap();
            let sets = candidates_from_noises(&params, &data, &noises, 4).unwrap();
            let direct = disco_objective(&data, &sets, &config).unwrap();
            let mut g = Graph::new();
            let bound = params.bind(&mut g).unwrap();
            let node = disco_objective_node(&mut g, &bound, &data, &noises, &config).unwrap();
            let via_graph = g.value(node).data()[0];
            assert!((direct - via_graph).abs() < 1e-12 * (1.0 + direct.abs()));
        }
    }
}

#[test]
fn gamma_zero_is_the_cross_term_and_half_is_the_energy_score() {
    let mut rng = StreamRng::seed_from_u64(5);
    let params = NetworkParams::init(&small_net(), 2).unwrap();
    let data = batch(7, &mut rng);
    let noises = draw_noises(params.config(), data.len(), 5, &mut rng).unwrap();
    let sets = candidates_from_noises(&params, &data, &noises, 5).unwrap();
    let loss = LossSpec::default();
    let zero = ObjectiveConfig::new(0.0, 5, loss.clone()).unwrap();
    assert_eq!(
        disco_objective(&data, &sets, &zero).unwrap(),
        div_pq_hat(&data, &sets, &loss).unwrap()
    );
    let half = ObjectiveConfig::new(0.5, 5, loss.clone()).unwrap();
    let mean_es = sets
        .iter()
        .zip(&data)
        .map(|(s, e)| energy_score_sample(s, &e.y, &loss).unwrap())
        .sum::<f64>()
        / data.len() as f64;
    assert!((disco_objective(&data, &sets, &half).unwrap() - mean_es).abs() < 1e-12);
}

#[test]
fn diversity_term_needs_two_candidates() {
    assert!(matches!(
        ObjectiveConfig::new(0.5, 1, LossSpec::default()),
        Err(Error::Estimator {
            required: 2,
            got: 1
        })
    ));
    assert!(ObjectiveConfig::new(0.0, 1, LossSpec::default()).is_ok());
    assert!(ObjectiveConfig::new(1.5, 4, LossSpec::default()).is_err());
}

// A lookup generator: each candidate is an i.i.d. draw from a discrete Q.
#[test]
fn self_diversity_estimate_is_unbiased() {
    let spec = LossSpec::euclidean(1.0).unwrap();
    let support = vec![
        vec![0.0, 0.0],
        vec![1.0, 0.5],
        vec![-2.0, 1.0],
        vec![0.3, -1.7],
        vec![2.5, 2.5],
    ];
    let probs = vec![0.1, 0.3, 0.2, 0.25, 0.15];
    let q = DiscreteDistribution::new(support.clone(), probs.clone()).unwrap();
    let exact = expected_loss(&q, &q, &spec).unwrap();
    let mut rng = StreamRng::seed_from_u64(21);
    let draws: Vec<f64> = (0..10_000)
        .map(|_| {
            let rows: Vec<&[f64]> = (0..3)
                .map(|_| {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut pick = support.len() - 1;
                    for (i, p) in probs.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            pick = i;
                            break;
                        }
                    }
                    support[pick].as_slice()
                })
                .collect();
            div_qq_hat(&[CandidateSet::from_rows(0, &rows).unwrap()], &spec).unwrap()
        })
        .collect();
    let ms = MeanSem::from_values(&draws).unwrap();
    assert!(
        (ms.mean - exact).abs() < 3.0 * ms.sem,
        "{} vs {exact}",
        ms.mean
    );
}

#[test]
fn noise_free_candidates_coincide() {
    let cfg = small_net().without_noise();
    let params = NetworkParams::init(&cfg, 3).unwrap();
    let mut rng = StreamRng::seed_from_u64(3);
    let data = batch(4, &mut rng);
    let noises = draw_noises(&cfg, data.len(), 6, &mut rng).unwrap();
    for set in candidates_from_noises(&params, &data, &noises, 6).unwrap() {
        assert!(set.candidates.iter().all(|c| c == &set.candidates[0]));
        assert_eq!(div_qq_hat(&[set], &LossSpec::default()).unwrap(), 0.0);
    }
}

#[test]
fn parameter_count_is_closed_form() {
    for cfg in [
        small_net(),
        small_net().without_noise(),
        NetConfig::desk(3, 4),
        NetConfig::wide_noise(2, 2),
    ] {
        let mut widths = vec![cfg.x_dim];
        widths.extend(&cfg.encoder_widths);
        let enc_out = *widths.last().unwrap();
        let mut dec = vec![enc_out + if cfg.noise_enabled { cfg.z_dim } else { 0 }];
        dec.extend(&cfg.decoder_widths);
        dec.push(cfg.y_dim);
        let count: usize = widths
            .windows(2)
            .chain(dec.windows(2))
            .map(|w| w[0] * w[1] + w[1])
            .sum();
        assert_eq!(cfg.param_count(), count);
        assert_eq!(NetworkParams::init(&cfg, 0).unwrap().len(), count);
    }
}

// Within one activation region the output is affine in z, so three
// collinear noises give equal successive differences.
#[test]
fn output_is_locally_linear_in_noise() {
    let cfg = NetConfig::desk(2, 3);
    let mut rng = StreamRng::seed_from_u64(8);
    for trial in 0..50 {
        let params = NetworkParams::init(&cfg, trial).unwrap();
        let x = Tensor::vector(vec![
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ])
        .unwrap();
        let z0: Vec<f64> = (0..cfg.z_dim)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let u: Vec<f64> = (0..cfg.z_dim)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let at = |t: f64| {
            let z = z0.iter().zip(&u).map(|(a, b)| a + t * b).collect();
            netgen::predict(&params, &x, Some(&Tensor::vector(z).unwrap())).unwrap()
        };
        let h = 1e-7;
        let (g0, g1, g2) = (at(0.0), at(h), at(2.0 * h));
        for i in 0..cfg.y_dim {
            let d1 = g1.data()[i] - g0.data()[i];
            let d2 = g2.data()[i] - g1.data()[i];
            assert!(
                (d2 - d1).abs() <= 1e-6 * d1.abs() + 1e-13,
                "trial {trial}: {d1} vs {d2}"
            );
        }
    }
}
