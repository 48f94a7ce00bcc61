//! Synthetic data: a two-component 2-D Gaussian mixture, a conditional
//! bimodal regression task, and the toy experiment that fits a diagonal
//! Gaussian to the mixture by grid search under different training losses.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::diff::Tensor;
use crate::rngs;
use crate::scoring::LossSpec;
use crate::stats::MeanSem;
use crate::{Error, Example, Result};

/// One diagonal Gaussian component of a [`GmmSpec`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmComponent {
    pub mean: [f64; 2],
    pub std: [f64; 2],
    pub weight: f64,
}

/// Mixture of two bidimensional diagonal Gaussians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmSpec {
    pub components: [GmmComponent; 2],
}

impl GmmSpec {
    /// Means `(−2, −2)` and `(2, 2)` with weights 0.7 and 0.3, stddevs
    /// `(0.5, 1.5)` for both components.
    pub fn toy() -> Self {
        let c = |m: f64, weight: f64| GmmComponent {
            mean: [m, m],
            std: [0.5, 1.5],
            weight,
        };
        Self {
            components: [c(-2.0, 0.7), c(2.0, 0.3)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.components {
            if c.std.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
                return Err(Error::Parameter("mixture stddevs must be > 0".into()));
            }
            if !(c.weight > 0.0 && c.weight < 1.0) {
                return Err(Error::Parameter(
                    "mixture weights must lie in (0, 1)".into(),
                ));
            }
        }
        let total = self.components[0].weight + self.components[1].weight;
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter(format!("mixture weights sum to {total}")));
        }
        Ok(())
    }

    pub fn mean(&self) -> [f64; 2] {
        let [a, b] = self.components;
        [
            a.weight * a.mean[0] + b.weight * b.mean[0],
            a.weight * a.mean[1] + b.weight * b.mean[1],
        ]
    }
}

/// `n` i.i.d. draws: pick a component by weight, then sample it.
pub fn gen_gmm2d<R: RngCore + ?Sized>(
    spec: &GmmSpec,
    n: usize,
    rng: &mut R,
) -> Result<Vec<[f64; 2]>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Parameter("n must be at least 1".into()));
    }
    Ok((0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let c = if u < spec.components[0].weight {
                &spec.components[0]
            } else {
                &spec.components[1]
            };
            let e0: f64 = StandardNormal.sample(rng);
            let e1: f64 = StandardNormal.sample(rng);
            [c.mean[0] + c.std[0] * e0, c.mean[1] + c.std[1] * e1]
        })
        .collect())
}

/// Stddev of the additive noise around each mode of the bimodal task.
pub const BIMODAL_NOISE_SIGMA: f64 = 0.1;

/// Centre of the upper mode, `1 + x²`; the lower mode is its negation.
pub fn bimodal_mode(x: f64) -> f64 {
    1.0 + x * x
}

/// `x ∼ U[−1, 1]`, `y = ±(1 + x²) + N(0, 0.1²)` with a fair sign.
pub fn gen_conditional_bimodal<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<Example>> {
    if n == 0 {
        return Err(Error::Parameter("n must be at least 1".into()));
    }
    let noise = Normal::new(0.0, BIMODAL_NOISE_SIGMA).expect("valid sigma");
    (0..n)
        .map(|_| {
            let x: f64 = rng.random_range(-1.0..=1.0);
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let y = sign * bimodal_mode(x) + noise.sample(rng);
            Ok(Example::new(
                Tensor::vector(alloc::vec![x])?,
                Tensor::vector(alloc::vec![y])?,
            ))
        })
        .collect()
}

/// `(μ1, μ2, σ1, σ2)` of a diagonal Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagGaussianParams {
    pub mu1: f64,
    pub mu2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
}

impl DiagGaussianParams {
    pub fn new(mu1: f64, mu2: f64, sigma1: f64, sigma2: f64) -> Result<Self> {
        if !(sigma1 > 0.0 && sigma2 > 0.0) {
            return Err(Error::Parameter("sigmas must be > 0".into()));
        }
        Ok(Self {
            mu1,
            mu2,
            sigma1,
            sigma2,
        })
    }

    fn at(&self, eps: [f64; 2]) -> [f64; 2] {
        [
            self.mu1 + self.sigma1 * eps[0],
            self.mu2 + self.sigma2 * eps[1],
        ]
    }
}

/// Evenly spaced values `lo..=hi`; a single step yields `lo`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl GridAxis {
    pub fn new(lo: f64, hi: f64, steps: usize) -> Self {
        Self { lo, hi, steps }
    }

    pub fn point(v: f64) -> Self {
        Self::new(v, v, 1)
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return alloc::vec![self.lo];
        }
        let h = (self.hi - self.lo) / (self.steps - 1) as f64;
        (0..self.steps).map(|i| self.lo + h * i as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub mu1: GridAxis,
    pub mu2: GridAxis,
    pub sigma1: GridAxis,
    pub sigma2: GridAxis,
}

impl GridSpec {
    /// μ in `[−2, 2]` at 0.25 spacing, σ in `[0.25, 3]` at 0.25 spacing.
    pub fn toy() -> Self {
        let mu = GridAxis::new(-2.0, 2.0, 17);
        let sigma = GridAxis::new(0.25, 3.0, 12);
        Self {
            mu1: mu,
            mu2: mu,
            sigma1: sigma,
            sigma2: sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, a) in [
            ("mu1", self.mu1),
            ("mu2", self.mu2),
            ("sigma1", self.sigma1),
            ("sigma2", self.sigma2),
        ] {
            if a.steps == 0 || !(a.lo <= a.hi) || !a.lo.is_finite() || !a.hi.is_finite() {
                return Err(Error::Parameter(format!(
                    "grid axis {name} is empty or inverted"
                )));
            }
        }
        if !(self.sigma1.lo > 0.0 && self.sigma2.lo > 0.0) {
            return Err(Error::Parameter(
                "sigma grid ranges must be strictly positive".into(),
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.mu1.steps * self.mu2.steps * self.sigma1.steps * self.sigma2.steps
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn standard_normals<R: RngCore + ?Sized>(count: usize, rng: &mut R) -> Vec<[f64; 2]> {
    (0..count)
        .map(|_| [StandardNormal.sample(rng), StandardNormal.sample(rng)])
        .collect()
}

fn check_loss_2d(loss: &LossSpec) -> Result<()> {
    if !loss.weights().is_empty() && loss.weights().len() != 2 {
        return Err(Error::dim("loss weights", &[loss.weights().len()], &[2]));
    }
    Ok(())
}

fn check_gamma_m(gamma: f64, m: usize) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Parameter(format!(
            "gamma must lie in [0, 1], got {gamma}"
        )));
    }
    if m < 2 {
        return Err(Error::Estimator {
            required: 2,
            got: m,
        });
    }
    Ok(())
}

/// Mean over ordered pairs of `Δ(σ∘ε_j, σ∘ε_j')`; the offset μ cancels.
fn pairwise_spread(loss: &LossSpec, sigma: [f64; 2], eps: &[[f64; 2]]) -> f64 {
    let m = eps.len();
    let mut s = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            let a = [sigma[0] * eps[i][0], sigma[1] * eps[i][1]];
            let b = [sigma[0] * eps[j][0], sigma[1] * eps[j][1]];
            s += loss.eval_unchecked(&a, &b);
        }
    }
    2.0 * s / (m * (m - 1)) as f64
}

/// Grid search for the diagonal Gaussian minimising
/// `DIV̂(P, Q) − γ·DIV̂(Q, Q)` on `train`.
///
/// Each data point gets `m` standard-normal draws, shared by every grid point
/// (common random numbers), so candidates are compared on identical noise.
/// Grid order is μ1, μ2, σ1, σ2 (outermost first); the first minimum wins.
pub fn fit_gaussian_grid<R: RngCore + ?Sized>(
    train: &[[f64; 2]],
    grid: &GridSpec,
    loss: &LossSpec,
    gamma: f64,
    m: usize,
    rng: &mut R,
) -> Result<DiagGaussianParams> {
    if train.is_empty() {
        return Err(Error::Contract("empty training set".into()));
    }
    grid.validate()?;
    check_loss_2d(loss)?;
    check_gamma_m(gamma, m)?;

    let eps = standard_normals(train.len() * m, rng);
    let n = train.len() as f64;
    let (mu1s, mu2s, s1s, s2s) = (
        grid.mu1.values(),
        grid.mu2.values(),
        grid.sigma1.values(),
        grid.sigma2.values(),
    );

    // σ-only term, averaged over data points
    let mut spread = alloc::vec![0.0; s1s.len() * s2s.len()];
    if gamma > 0.0 {
        for (a, &s1) in s1s.iter().enumerate() {
            for (b, &s2) in s2s.iter().enumerate() {
                let total: f64 = eps
                    .chunks(m)
                    .map(|e| pairwise_spread(loss, [s1, s2], e))
                    .sum();
                spread[a * s2s.len() + b] = total / n;
            }
        }
    }

    let mut best: Option<(f64, DiagGaussianParams)> = None;
    for &mu1 in &mu1s {
        for &mu2 in &mu2s {
            for (a, &s1) in s1s.iter().enumerate() {
                for (b, &s2) in s2s.iter().enumerate() {
                    let q = DiagGaussianParams {
                        mu1,
                        mu2,
                        sigma1: s1,
                        sigma2: s2,
                    };
                    let mut pq = 0.0;
                    for (y, e) in train.iter().zip(eps.chunks(m)) {
                        let mut s = 0.0;
                        for &ej in e {
                            s += loss.eval_unchecked(y, &q.at(ej));
                        }
                        pq += s / m as f64;
                    }
                    let value = pq / n - gamma * spread[a * s2s.len() + b];
                    if best.map_or(true, |(bv, _)| value < bv) {
                        best = Some((value, q));
                    }
                }
            }
        }
    }
    Ok(best.expect("grid validated non-empty").1)
}

/// `DIV̂(P, Q) − γ·DIV̂(Q, Q)` of a fitted Gaussian on `test`, mean ± sem over
/// test points, with `m` fresh model samples per point.
pub fn eval_gaussian<R: RngCore + ?Sized>(
    params: &DiagGaussianParams,
    test: &[[f64; 2]],
    loss: &LossSpec,
    gamma: f64,
    m: usize,
    rng: &mut R,
) -> Result<MeanSem> {
    if test.is_empty() {
        return Err(Error::Contract("empty test set".into()));
    }
    check_loss_2d(loss)?;
    check_gamma_m(gamma, m)?;
    let values: Vec<f64> = test
        .iter()
        .map(|y| {
            let eps = standard_normals(m, rng);
            let pq = eps
                .iter()
                .map(|&e| loss.eval_unchecked(y, &params.at(e)))
                .sum::<f64>()
                / m as f64;
            pq - gamma * pairwise_spread(loss, [params.sigma1, params.sigma2], &eps)
        })
        .collect();
    Ok(MeanSem::from_values(&values).expect("non-empty"))
}

/// Settings of the toy cross-loss experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyConfig {
    pub mixture: GmmSpec,
    pub n_train: usize,
    pub n_test: usize,
    pub grid: GridSpec,
    pub gamma: f64,
    pub m_fit: usize,
    pub m_eval: usize,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            mixture: GmmSpec::toy(),
            n_train: 2000,
            n_test: 5000,
            grid: GridSpec::toy(),
            gamma: 0.5,
            m_fit: 12,
            m_eval: 8,
        }
    }
}

/// Result of one toy run: index 0 is `Δ_A`, index 1 is `Δ_B`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyResult {
    pub fits: [DiagGaussianParams; 2],
    /// `table[training loss][task loss]`.
    pub table: [[MeanSem; 2]; 2],
}

impl ToyResult {
    /// Per task-loss column: does training with that same loss score strictly lower?
    pub fn diagonal_dominance(&self) -> [bool; 2] {
        [
            self.table[0][0].mean < self.table[1][0].mean,
            self.table[1][1].mean < self.table[0][1].mean,
        ]
    }
}

/// Fits one Gaussian per training loss and evaluates each under both task
/// losses. Both fits share the training data and fit noise; both rows of a
/// column share the evaluation noise.
pub fn run_toy(config: &ToyConfig, seed: u64) -> Result<ToyResult> {
    let losses = [LossSpec::delta_a(), LossSpec::delta_b()];
    let train = gen_gmm2d(
        &config.mixture,
        config.n_train,
        &mut rngs::stream(seed, "toy-train"),
    )?;
    let test = gen_gmm2d(
        &config.mixture,
        config.n_test,
        &mut rngs::stream(seed, "toy-test"),
    )?;
    let mut fits = Vec::with_capacity(2);
    for loss in &losses {
        let mut rng = rngs::stream(seed, "toy-fit");
        fits.push(fit_gaussian_grid(
            &train,
            &config.grid,
            loss,
            config.gamma,
            config.m_fit,
            &mut rng,
        )?);
    }
    let fits = [fits[0], fits[1]];
    let mut table = [[MeanSem {
        mean: 0.0,
        sem: 0.0,
        count: 0,
    }; 2]; 2];
    for (row, fit) in fits.iter().enumerate() {
        for (col, loss) in losses.iter().enumerate() {
            let mut rng = rngs::indexed_stream(seed, "toy-eval", col as u64);
            table[row][col] =
                eval_gaussian(fit, &test, loss, config.gamma, config.m_eval, &mut rng)?;
        }
    }
    Ok(ToyResult { fits, table })
}
