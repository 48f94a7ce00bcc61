//! Experiment configuration, read from TOML.
//!
//! Every section is optional and every key inside a section falls back to
//! its default, but unknown keys are rejected and `schema` and `seed` must
//! be given. The config hash is the SHA-256 of the fully resolved config
//! re-serialized as TOML, so two files that resolve to the same settings
//! share a hash.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use disco_core::metrics::{EvalOptions, JointLayout, PointwiseMode};
use disco_core::synth::{GmmComponent, GmmSpec, GridAxis, GridSpec, ToyConfig};
use disco_core::{LossSpec, NetConfig, ObjectiveConfig, TrainConfig};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub seed: u64,
    #[serde(default)]
    pub net: NetSection,
    #[serde(default)]
    pub objective: ObjectiveSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub gradcheck: GradcheckSection,
    #[serde(default)]
    pub toy: ToySection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetSection {
    pub x_dim: usize,
    pub y_dim: usize,
    pub z_dim: usize,
    pub encoder: Vec<usize>,
    pub decoder: Vec<usize>,
    pub noise: bool,
}

impl Default for NetSection {
    fn default() -> Self {
        Self {
            x_dim: 1,
            y_dim: 1,
            z_dim: 8,
            encoder: vec![64],
            decoder: vec![64, 64],
            noise: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveSection {
    pub gamma: f64,
    pub k: usize,
    pub beta: f64,
    /// Per-coordinate loss weights; empty means all ones.
    pub weights: Vec<f64>,
}

impl Default for ObjectiveSection {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            k: 16,
            beta: 1.0,
            weights: vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub lr: f64,
    pub momentum: f64,
    pub l2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub val_count: usize,
    /// Write a checkpoint every this many epochs; 0 writes only the final one.
    pub checkpoint_every: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            lr: 0.01,
            momentum: 0.9,
            l2: 1e-4,
            batch_size: 64,
            epochs: 100,
            val_count: 500,
            checkpoint_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// `bimodal`, or `csv` to read `path` (or `--data`).
    pub source: String,
    pub n: usize,
    pub path: Option<String>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            source: "bimodal".into(),
            n: 2000,
            path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub k: usize,
    /// Joints of three coordinates each; 0 treats every coordinate as a joint.
    pub joints: usize,
    pub distances: Vec<f64>,
    /// `meu` or `zero-noise`.
    pub pointwise: String,
    /// Gaussian spread turning a noise-free network into a sampler.
    pub base_sigma: Option<f64>,
    pub task_beta: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            k: 16,
            joints: 0,
            distances: vec![0.1, 0.25, 0.5, 1.0, 2.0],
            pointwise: "meu".into(),
            base_sigma: None,
            task_beta: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub seeds: Vec<u64>,
    pub l2: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            seeds: vec![0, 1, 2],
            l2: vec![0.0, 1e-4, 1e-3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckSection {
    pub x_dim: usize,
    pub y_dim: usize,
    pub z_dim: usize,
    pub hidden: usize,
    pub n: usize,
    pub k: usize,
    pub gammas: Vec<f64>,
    pub betas: Vec<f64>,
    pub step: f64,
    pub threshold: f64,
}

impl Default for GradcheckSection {
    fn default() -> Self {
        Self {
            x_dim: 2,
            y_dim: 2,
            z_dim: 4,
            hidden: 8,
            n: 4,
            k: 3,
            gammas: vec![0.0, 0.25, 0.5],
            betas: vec![0.5, 1.0, 1.5, 1.9],
            step: 1e-6,
            threshold: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSection {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl From<GridAxis> for AxisSection {
    fn from(a: GridAxis) -> Self {
        Self {
            lo: a.lo,
            hi: a.hi,
            steps: a.steps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSection {
    pub mean: [f64; 2],
    pub std: [f64; 2],
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToySection {
    /// Independent repetitions, each on its own data seed.
    pub runs: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub gamma: f64,
    pub m_fit: usize,
    pub m_eval: usize,
    pub mu1: AxisSection,
    pub mu2: AxisSection,
    pub sigma1: AxisSection,
    pub sigma2: AxisSection,
    pub components: Vec<ComponentSection>,
}

impl Default for ToySection {
    fn default() -> Self {
        let t = ToyConfig::default();
        Self {
            runs: 1,
            n_train: t.n_train,
            n_test: t.n_test,
            gamma: t.gamma,
            m_fit: t.m_fit,
            m_eval: t.m_eval,
            mu1: t.grid.mu1.into(),
            mu2: t.grid.mu2.into(),
            sigma1: t.grid.sigma1.into(),
            sigma2: t.grid.sigma2.into(),
            components: t
                .mixture
                .components
                .iter()
                .map(|c| ComponentSection {
                    mean: c.mean,
                    std: c.std,
                    weight: c.weight,
                })
                .collect(),
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

impl ExperimentConfig {
    pub fn defaults(seed: u64) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            seed,
            net: NetSection::default(),
            objective: ObjectiveSection::default(),
            train: TrainSection::default(),
            data: DataSection::default(),
            eval: EvalSection::default(),
            sweep: SweepSection::default(),
            gradcheck: GradcheckSection::default(),
            toy: ToySection::default(),
        }
    }

    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(config_err)?;
        if cfg.schema != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema {} (expected {SCHEMA_VERSION})",
                cfg.schema
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn net_config(&self) -> CliResult<NetConfig> {
        let n = &self.net;
        let cfg = NetConfig {
            x_dim: n.x_dim,
            y_dim: n.y_dim,
            z_dim: n.z_dim,
            encoder_widths: n.encoder.clone(),
            decoder_widths: n.decoder.clone(),
            noise_enabled: n.noise,
        };
        cfg.validate().map_err(config_err)?;
        Ok(cfg)
    }

    pub fn loss(&self) -> CliResult<LossSpec> {
        let o = &self.objective;
        let weights = if o.weights.is_empty() {
            vec![1.0; self.net.y_dim]
        } else if o.weights.len() == self.net.y_dim {
            o.weights.clone()
        } else {
            return Err(CliError::Config(format!(
                "objective.weights has {} entries but y_dim is {}",
                o.weights.len(),
                self.net.y_dim
            )));
        };
        LossSpec::new(o.beta, weights).map_err(config_err)
    }

    pub fn objective_config(&self) -> CliResult<ObjectiveConfig> {
        let k = if self.net.noise { self.objective.k } else { 1 };
        let gamma = if self.net.noise {
            self.objective.gamma
        } else {
            0.0
        };
        ObjectiveConfig::new(gamma, k, self.loss()?).map_err(config_err)
    }

    pub fn train_config(&self) -> CliResult<TrainConfig> {
        let t = &self.train;
        let cfg = TrainConfig {
            objective: self.objective_config()?,
            lr: t.lr,
            momentum: t.momentum,
            l2: t.l2,
            batch_size: t.batch_size,
            epochs: t.epochs,
            seed: self.seed,
            val_count: t.val_count,
        };
        cfg.validate().map_err(config_err)?;
        Ok(cfg)
    }

    pub fn eval_options(&self, y_dim: usize) -> CliResult<EvalOptions> {
        let e = &self.eval;
        if e.k == 0 {
            return Err(CliError::Config("eval.k must be at least 1".into()));
        }
        let layout = if e.joints == 0 {
            JointLayout::scalar(y_dim)
        } else if 3 * e.joints == y_dim {
            JointLayout::pose(e.joints)
        } else {
            return Err(CliError::Config(format!(
                "eval.joints = {} needs y_dim {}, got {y_dim}",
                e.joints,
                3 * e.joints
            )));
        };
        let pointwise = match e.pointwise.as_str() {
            "meu" => PointwiseMode::Meu,
            "zero-noise" => PointwiseMode::ZeroNoise,
            other => {
                return Err(CliError::Config(format!(
                    "eval.pointwise must be `meu` or `zero-noise`, got `{other}`"
                )))
            }
        };
        if e.distances.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(CliError::Config(
                "eval.distances must be finite and non-negative".into(),
            ));
        }
        Ok(EvalOptions {
            k: e.k,
            layout,
            distances: e.distances.clone(),
            pointwise,
            base_sigma: e.base_sigma,
            task_loss: LossSpec::euclidean(e.task_beta).map_err(config_err)?,
        })
    }

    pub fn toy_config(&self) -> CliResult<ToyConfig> {
        let t = &self.toy;
        let axis = |a: AxisSection| GridAxis::new(a.lo, a.hi, a.steps);
        let components: [ComponentSection; 2] = t.components.clone().try_into().map_err(|_| {
            CliError::Config("toy.components must list exactly two components".into())
        })?;
        let mixture = GmmSpec {
            components: components.map(|c| GmmComponent {
                mean: c.mean,
                std: c.std,
                weight: c.weight,
            }),
        };
        mixture.validate().map_err(config_err)?;
        let grid = GridSpec {
            mu1: axis(t.mu1),
            mu2: axis(t.mu2),
            sigma1: axis(t.sigma1),
            sigma2: axis(t.sigma2),
        };
        grid.validate().map_err(config_err)?;
        if t.runs == 0 || t.n_train == 0 || t.n_test == 0 || t.m_fit < 2 || t.m_eval < 2 {
            return Err(CliError::Config(
                "toy.runs, n_train and n_test must be positive and m_fit, m_eval at least 2".into(),
            ));
        }
        if !(0.0..=1.0).contains(&t.gamma) {
            return Err(CliError::Config("toy.gamma must lie in [0, 1]".into()));
        }
        Ok(ToyConfig {
            mixture,
            n_train: t.n_train,
            n_test: t.n_test,
            grid,
            gamma: t.gamma,
            m_fit: t.m_fit,
            m_eval: t.m_eval,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_takes_defaults() {
        let cfg = ExperimentConfig::from_toml("schema = 1\nseed = 3\n").unwrap();
        assert_eq!(cfg, ExperimentConfig::defaults(3));
        let round = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(round, cfg);
        assert_eq!(round.hash(), cfg.hash());
    }

    #[test]
    fn unknown_and_missing_keys_are_rejected() {
        for text in [
            "schema = 1\nseed = 0\nbogus = 1\n",
            "schema = 1\nseed = 0\n[train]\nlearning_rate = 0.1\n",
            "schema = 1\n",
            "seed = 0\n",
            "schema = 2\nseed = 0\n",
        ] {
            let e = ExperimentConfig::from_toml(text).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{text}: {e}");
        }
    }

    #[test]
    fn hash_tracks_resolved_settings() {
        let a = ExperimentConfig::from_toml("schema = 1\nseed = 0\n").unwrap();
        let b = ExperimentConfig::from_toml("schema = 1\nseed = 0\n[train]\nlr = 0.01\n").unwrap();
        let c = ExperimentConfig::defaults(1);
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn core_configs_validate() {
        let mut cfg = ExperimentConfig::defaults(0);
        assert!(cfg.train_config().is_ok());
        cfg.objective.gamma = 2.0;
        assert!(cfg.train_config().is_err());
        cfg.objective.gamma = 0.5;
        cfg.objective.weights = vec![1.0, 2.0];
        assert!(cfg.loss().is_err());
        cfg.objective.weights.clear();
        cfg.eval.joints = 2;
        assert!(cfg.eval_options(1).is_err());
        cfg.toy.components.pop();
        assert!(cfg.toy_config().is_err());
    }
}
