//! The five experiment commands. Each writes its outputs under `out` and
//! reports whether its built-in check passed.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

use disco_core::diff::{
    analytic_gradient, numeric_gradient, relative_error, Graph, NodeId, Tensor,
};
use disco_core::metrics::{self, MetricsReport};
use disco_core::netgen::{bind_layers, NetworkParams};
use disco_core::objective::{disco_objective_node, draw_noises};
use disco_core::synth::{gen_conditional_bimodal, run_toy, DiagGaussianParams, ToyResult};
use disco_core::trainer::{self, EpochRecord, TrainHistory, TrainObserver};
use disco_core::{rngs, Example, LossSpec, NetConfig, ObjectiveConfig};
use rand::Rng;

use crate::config::ExperimentConfig;
use crate::dataset::load_csv;
use crate::error::{CliError, CliResult};
use crate::params_io::{load_params, save_params};
use crate::report::{
    config_text, csv_text, history_csv, metrics_csv, metrics_json, timing_csv, with_hash,
    write_file, write_json,
};

/// Result of a command that ran to completion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Passed,
    /// The command's own check failed; outputs were still written.
    CheckFailed(String),
}

/// A config together with its hash, shared by every command.
pub struct Run {
    pub config: ExperimentConfig,
    pub hash: String,
    pub out: PathBuf,
}

impl Run {
    pub fn new(config: ExperimentConfig, out: &Path) -> CliResult<Self> {
        let hash = config.hash();
        fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
        let run = Self {
            config,
            hash,
            out: out.to_path_buf(),
        };
        write_file(
            &run.path("config.toml"),
            &config_text(&run.hash, &run.config.to_toml()),
        )?;
        Ok(run)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
        write_file(&self.path(name), &csv_text(&self.hash, header, rows))
    }

    fn write_json(&self, name: &str, value: Value) -> CliResult<()> {
        write_json(&self.path(name), &with_hash(&self.hash, value))
    }
}

/// Examples from `--data`, from `data.path` when `data.source = "csv"`, or
/// from the bimodal generator seeded by the `data` substream.
pub fn load_dataset(
    config: &ExperimentConfig,
    data: Option<&Path>,
    x_dim: usize,
    y_dim: usize,
) -> CliResult<Vec<Example>> {
    let path = data.map(Path::to_path_buf).or_else(|| {
        (config.data.source == "csv")
            .then(|| config.data.path.as_ref().map(PathBuf::from))
            .flatten()
    });
    let examples = match (path, config.data.source.as_str()) {
        (Some(p), _) => load_csv(&p, x_dim, y_dim)?,
        (None, "csv") => {
            return Err(CliError::Config(
                "data.source is csv but no path was given".into(),
            ))
        }
        (None, "bimodal") => {
            if (x_dim, y_dim) != (1, 1) {
                return Err(CliError::Config(format!(
                    "the bimodal generator has x_dim 1 and y_dim 1, the network has {x_dim} and {y_dim}"
                )));
            }
            if config.data.n == 0 {
                return Err(CliError::Config("data.n must be positive".into()));
            }
            gen_conditional_bimodal(config.data.n, &mut rngs::stream(config.seed, "data"))?
        }
        (None, other) => return Err(CliError::Config(format!("unknown data.source `{other}`"))),
    };
    if examples.is_empty() {
        return Err(CliError::Data("dataset has no examples".into()));
    }
    Ok(examples)
}

fn params_json(p: &DiagGaussianParams) -> Value {
    json!({ "mu1": p.mu1, "mu2": p.mu2, "sigma1": p.sigma1, "sigma2": p.sigma2 })
}

/// Toy cross-loss table over `toy.runs` data seeds; fails unless every
/// column is strictly diagonal-dominant in every run.
pub fn cmd_toy(run: &Run) -> CliResult<Outcome> {
    let toy = run.config.toy_config()?;
    let seeds: Vec<u64> = (0..run.config.toy.runs)
        .map(|r| rngs::derive_indexed_seed(run.config.seed, "toy", r as u64))
        .collect();
    let results: Vec<disco_core::Result<ToyResult>> = std::thread::scope(|s| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let toy = &toy;
                s.spawn(move || run_toy(toy, seed))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("toy worker panicked"))
            .collect()
    });

    let names = ["delta_a", "delta_b"];
    let mut rows = Vec::new();
    let mut runs_json = Vec::new();
    let mut failures = Vec::new();
    for (r, (seed, result)) in seeds.iter().zip(results).enumerate() {
        let result = result?;
        for (train, name) in names.iter().enumerate() {
            let t = &result.table[train];
            rows.push(vec![
                r.to_string(),
                seed.to_string(),
                name.to_string(),
                t[0].mean.to_string(),
                t[0].sem.to_string(),
                t[1].mean.to_string(),
                t[1].sem.to_string(),
            ]);
        }
        let dom = result.diagonal_dominance();
        for (col, ok) in dom.iter().enumerate() {
            if !ok {
                failures.push(format!("run {r}: column {}", names[col]));
            }
        }
        runs_json.push(json!({
            "run": r,
            "seed": seed,
            "fits": { "delta_a": params_json(&result.fits[0]), "delta_b": params_json(&result.fits[1]) },
            "diagonal_dominance": { "delta_a": dom[0], "delta_b": dom[1] },
        }));
    }
    run.write_csv(
        "toy_table.csv",
        &[
            "run",
            "seed",
            "train_loss",
            "task_delta_a_mean",
            "task_delta_a_sem",
            "task_delta_b_mean",
            "task_delta_b_sem",
        ],
        &rows,
    )?;
    run.write_json("toy_fits.json", json!({ "runs": runs_json }))?;
    Ok(if failures.is_empty() {
        Outcome::Passed
    } else {
        Outcome::CheckFailed(format!(
            "diagonal dominance failed for {}",
            failures.join(", ")
        ))
    })
}

struct Observer<'a> {
    run: &'a Run,
    clock: Option<Instant>,
    every: usize,
    failure: Option<CliError>,
}

impl TrainObserver for Observer<'_> {
    fn now(&mut self) -> f64 {
        self.clock.map_or(0.0, |c| c.elapsed().as_secs_f64())
    }

    fn on_epoch(&mut self, record: &EpochRecord, params: &NetworkParams) -> disco_core::Result<()> {
        if self.every == 0 || record.epoch % self.every != 0 {
            return Ok(());
        }
        let path = self
            .run
            .path(&format!("checkpoint_epoch{}.params", record.epoch));
        save_params(&path, params, &self.run.hash).map_err(|e| {
            let msg = e.to_string();
            self.failure = Some(e);
            disco_core::Error::Contract(msg)
        })
    }
}

fn train_observed(
    run: &Run,
    net: &NetConfig,
    config: &disco_core::TrainConfig,
    data: &[Example],
    timing: bool,
) -> CliResult<(NetworkParams, TrainHistory)> {
    let mut obs = Observer {
        run,
        clock: timing.then(Instant::now),
        every: run.config.train.checkpoint_every,
        failure: None,
    };
    let result = trainer::train_with(net, config, data, &mut obs);
    if let Some(e) = obs.failure {
        return Err(e);
    }
    Ok(result?)
}

fn evaluate_on(run: &Run, params: &NetworkParams, data: &[Example]) -> CliResult<MetricsReport> {
    let opts = run.config.eval_options(params.config().y_dim)?;
    Ok(metrics::evaluate(
        params,
        data,
        &opts,
        &mut rngs::stream(run.config.seed, "eval"),
    )?)
}

/// Trains one model and writes `model.params`, `history.csv` and
/// `summary.json` (plus `timing.csv` when `timing` is set).
pub fn cmd_train(run: &Run, data: Option<&Path>, timing: bool) -> CliResult<Outcome> {
    let net = run.config.net_config()?;
    let train_cfg = run.config.train_config()?;
    let examples = load_dataset(&run.config, data, net.x_dim, net.y_dim)?;
    if train_cfg.val_count >= examples.len() {
        return Err(CliError::Config(format!(
            "train.val_count {} leaves no training data out of {} examples",
            train_cfg.val_count,
            examples.len()
        )));
    }
    let (params, history) = train_observed(run, &net, &train_cfg, &examples, timing)?;
    save_params(&run.path("model.params"), &params, &run.hash)?;
    write_file(
        &run.path("history.csv"),
        &history_csv(&run.hash, &history.epochs),
    )?;
    if timing {
        write_file(
            &run.path("timing.csv"),
            &timing_csv(&run.hash, &history.epochs),
        )?;
    }

    let (evaluated_on, eval_data) = if train_cfg.val_count > 0 {
        let (_, val) = trainer::train_val_split(
            &examples,
            train_cfg.val_count,
            rngs::derive_seed(run.config.seed, "split"),
        )?;
        ("validation", val)
    } else {
        ("train", examples)
    };
    let report = evaluate_on(run, &params, &eval_data)?;
    let last = history.epochs.last().expect("at least one epoch");
    run.write_json(
        "summary.json",
        json!({
            "epochs": history.epochs.len(),
            "final_train_obj": last.train_obj,
            "final_val_obj": last.val_obj,
            "evaluated_on": evaluated_on,
            "metrics": metrics_json(&report),
        }),
    )?;
    Ok(Outcome::Passed)
}

/// Evaluates a checkpoint and writes `metrics.json` and `metrics.csv`.
///
/// With `eval.k = 1` the pointwise metrics are still written, then the
/// missing ProbLoss is reported as a numeric error.
pub fn cmd_eval(run: &Run, checkpoint: &Path, data: Option<&Path>) -> CliResult<Outcome> {
    let (params, checkpoint_hash) = load_params(checkpoint)?;
    let cfg = params.config().clone();
    let examples = load_dataset(&run.config, data, cfg.x_dim, cfg.y_dim)?;
    let report = evaluate_on(run, &params, &examples)?;
    let mut doc = metrics_json(&report);
    doc["checkpoint_config_hash"] = json!(checkpoint_hash);
    run.write_json("metrics.json", doc)?;
    write_file(&run.path("metrics.csv"), &metrics_csv(&run.hash, &report))?;
    match report.probloss {
        Ok(_) => Ok(Outcome::Passed),
        Err(e) => Err(CliError::Numeric(e)),
    }
}

/// Maximum relative error of backprop against central differences on a
/// small network, for every `(γ, β)` pair of the `gradcheck` section.
///
/// `corrupt` perturbs the analytic gradient so the check must fail.
pub fn cmd_gradcheck(run: &Run, corrupt: bool) -> CliResult<Outcome> {
    let gc = &run.config.gradcheck;
    let net = NetConfig {
        x_dim: gc.x_dim,
        y_dim: gc.y_dim,
        z_dim: gc.z_dim,
        encoder_widths: vec![gc.hidden],
        decoder_widths: vec![],
        noise_enabled: true,
    };
    net.validate()?;
    if gc.n == 0 {
        return Err(CliError::Config("gradcheck.n must be positive".into()));
    }
    let seed = run.config.seed;
    let params = NetworkParams::init(&net, rngs::derive_seed(seed, "init"))?;
    let theta = Tensor::vector(params.flat().to_vec())?;
    let mut rng = rngs::stream(seed, "gradcheck");
    let batch: Vec<Example> = (0..gc.n)
        .map(|_| {
            let x = (0..gc.x_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y = (0..gc.y_dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            Ok(Example::new(Tensor::vector(x)?, Tensor::vector(y)?))
        })
        .collect::<disco_core::Result<_>>()?;
    let noises = draw_noises(&net, gc.n, gc.k, &mut rng)?;

    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for &gamma in &gc.gammas {
        for &beta in &gc.betas {
            let objective = ObjectiveConfig::new(gamma, gc.k, LossSpec::euclidean(beta)?)?;
            let f = |g: &mut Graph, p: NodeId| {
                let bound = bind_layers(&net, g, p)?;
                disco_objective_node(g, &bound, &batch, &noises, &objective)
            };
            let mut analytic = analytic_gradient(&f, &theta)?;
            if corrupt {
                analytic.iter_mut().for_each(|a| *a = *a * 1.01 + 1e-3);
            }
            let numeric = numeric_gradient(&f, &theta, gc.step)?;
            let err = relative_error(&analytic, &numeric);
            worst = worst.max(err);
            let pass = err < gc.threshold;
            println!(
                "gamma {gamma} beta {beta}: max relative error {err:.3e} {}",
                if pass { "ok" } else { "FAIL" }
            );
            rows.push(vec![
                gamma.to_string(),
                beta.to_string(),
                format!("{err:e}"),
                pass.to_string(),
            ]);
        }
    }
    run.write_csv(
        "gradcheck.csv",
        &["gamma", "beta", "max_rel_err", "pass"],
        &rows,
    )?;
    Ok(if worst < gc.threshold {
        Outcome::Passed
    } else {
        Outcome::CheckFailed(format!(
            "max relative error {worst:e} >= {:e}",
            gc.threshold
        ))
    })
}

struct SweepPoint {
    seed: u64,
    l2: f64,
    params: NetworkParams,
    history: TrainHistory,
    val_obj: f64,
    val_probloss: f64,
}

/// Trains one model per `(seed, l2)` pair on a validation split fixed by the
/// master seed and keeps the one with the lowest validation ProbLoss.
pub fn cmd_sweep(run: &Run, data: Option<&Path>) -> CliResult<Outcome> {
    let cfg = &run.config;
    let net = cfg.net_config()?;
    let base = cfg.train_config()?;
    if cfg.sweep.seeds.is_empty() || cfg.sweep.l2.is_empty() {
        return Err(CliError::Config(
            "sweep.seeds and sweep.l2 must not be empty".into(),
        ));
    }
    if cfg.eval.k < 2 {
        return Err(CliError::Config(
            "sweep selects by ProbLoss, which needs eval.k >= 2".into(),
        ));
    }
    let examples = load_dataset(cfg, data, net.x_dim, net.y_dim)?;
    if base.val_count == 0 || base.val_count >= examples.len() {
        return Err(CliError::Config(format!(
            "sweep needs 0 < train.val_count < {} examples",
            examples.len()
        )));
    }
    let (train, val) = trainer::train_val_split(
        &examples,
        base.val_count,
        rngs::derive_seed(cfg.seed, "split"),
    )?;
    let opts = cfg.eval_options(net.y_dim)?;

    let grid: Vec<(u64, f64)> = cfg
        .sweep
        .seeds
        .iter()
        .flat_map(|&s| cfg.sweep.l2.iter().map(move |&c| (s, c)))
        .collect();
    let fit = |&(seed, l2): &(u64, f64)| -> CliResult<SweepPoint> {
        let tc = disco_core::TrainConfig {
            seed,
            l2,
            val_count: 0,
            ..base.clone()
        };
        tc.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let (params, history) = trainer::train(&net, &tc, &train)?;
        let val_obj = trainer::evaluate_objective(
            &params,
            &val,
            &tc.objective,
            tc.batch_size,
            &mut rngs::stream(seed, "val-noise"),
        )?;
        let report = metrics::evaluate(&params, &val, &opts, &mut rngs::stream(seed, "eval"))?;
        let val_probloss = report.probloss.map_err(CliError::Numeric)?.mean;
        Ok(SweepPoint {
            seed,
            l2,
            params,
            history,
            val_obj,
            val_probloss,
        })
    };
    let points: Vec<CliResult<SweepPoint>> = std::thread::scope(|s| {
        let handles: Vec<_> = grid.iter().map(|p| s.spawn(move || fit(p))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    let points = points.into_iter().collect::<CliResult<Vec<_>>>()?;

    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            let last = p.history.epochs.last().expect("at least one epoch");
            vec![
                p.seed.to_string(),
                p.l2.to_string(),
                last.train_obj.to_string(),
                p.val_obj.to_string(),
                p.val_probloss.to_string(),
            ]
        })
        .collect();
    run.write_csv(
        "sweep.csv",
        &["seed", "l2", "final_train_obj", "val_obj", "val_probloss"],
        &rows,
    )?;
    let best = points
        .iter()
        .reduce(|a, b| {
            if b.val_probloss < a.val_probloss {
                b
            } else {
                a
            }
        })
        .expect("non-empty grid");
    save_params(&run.path("best.params"), &best.params, &run.hash)?;
    run.write_json(
        "best.json",
        json!({ "seed": best.seed, "l2": best.l2, "val_obj": best.val_obj, "val_probloss": best.val_probloss }),
    )?;
    Ok(Outcome::Passed)
}
