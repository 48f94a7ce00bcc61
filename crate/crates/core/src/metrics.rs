//! Pointwise prediction from candidate sets and evaluation metrics.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;
use rand_distr::{Distribution, Normal};

use crate::diff::Tensor;
use crate::math;
use crate::netgen::{self, CandidateSet, NetworkParams};
use crate::scoring::{self, LossSpec};
use crate::stats::MeanSem;
use crate::{Error, Example, Result};

/// Partition of the output coordinates into joints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointLayout {
    /// `(start, len)` of each joint, contiguous and in order.
    groups: Vec<(usize, usize)>,
}

impl JointLayout {
    /// `joints` groups of three consecutive coordinates.
    pub fn pose(joints: usize) -> Self {
        Self {
            groups: (0..joints).map(|j| (3 * j, 3)).collect(),
        }
    }

    /// One singleton group per coordinate, for non-pose outputs.
    pub fn scalar(dim: usize) -> Self {
        Self {
            groups: (0..dim).map(|j| (j, 1)).collect(),
        }
    }

    pub fn joints(&self) -> usize {
        self.groups.len()
    }

    pub fn dim(&self) -> usize {
        self.groups.iter().map(|g| g.1).sum()
    }

    fn check(&self, y_dim: usize) -> Result<()> {
        if self.dim() != y_dim {
            return Err(Error::dim("joint layout", &[self.dim()], &[y_dim]));
        }
        Ok(())
    }

    fn joint<'a>(&self, y: &'a [f64], j: usize) -> &'a [f64] {
        let (s, l) = self.groups[j];
        &y[s..s + l]
    }
}

/// Euclidean error of each joint.
pub fn joint_errors(pred: &[f64], gt: &[f64], layout: &JointLayout) -> Result<Vec<f64>> {
    layout.check(pred.len())?;
    layout.check(gt.len())?;
    Ok((0..layout.joints())
        .map(|j| {
            let (p, g) = (layout.joint(pred, j), layout.joint(gt, j));
            math::sqrt(p.iter().zip(g).map(|(a, b)| (a - b) * (a - b)).sum())
        })
        .collect())
}

fn frame_errors(preds: &[Tensor], gts: &[Tensor], layout: &JointLayout) -> Result<Vec<Vec<f64>>> {
    if preds.len() != gts.len() {
        return Err(Error::Contract(format!(
            "{} predictions for {} ground truths",
            preds.len(),
            gts.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Contract("no frames to evaluate".into()));
    }
    preds
        .iter()
        .zip(gts)
        .map(|(p, g)| joint_errors(p.data(), g.data(), layout))
        .collect()
}

/// Maximum-expected-utility choice: the candidate with the smallest summed
/// task loss to all candidates. Ties go to the lowest index.
pub fn meu_predict(set: &CandidateSet, task_loss: &LossSpec) -> Result<(usize, Tensor)> {
    let cands = &set.candidates;
    if cands.is_empty() {
        return Err(Error::Contract("MEU needs at least one candidate".into()));
    }
    let mut best = (0, f64::INFINITY);
    for (i, a) in cands.iter().enumerate() {
        let mut total = 0.0;
        for b in cands {
            total += task_loss.eval(a.data(), b.data())?;
        }
        if total < best.1 {
            best = (i, total);
        }
    }
    Ok((best.0, cands[best.0].clone()))
}

/// Mean joint error: average over joints, then over frames.
pub fn mejee(preds: &[Tensor], gts: &[Tensor], layout: &JointLayout) -> Result<MeanSem> {
    let per_frame: Vec<f64> = frame_errors(preds, gts, layout)?
        .iter()
        .map(|e| e.iter().sum::<f64>() / e.len() as f64)
        .collect();
    Ok(MeanSem::from_values(&per_frame).expect("non-empty"))
}

/// Max joint error: worst joint per frame, averaged over frames.
pub fn majee(preds: &[Tensor], gts: &[Tensor], layout: &JointLayout) -> Result<MeanSem> {
    let per_frame: Vec<f64> = frame_errors(preds, gts, layout)?
        .iter()
        .map(|e| e.iter().copied().fold(0.0, f64::max))
        .collect();
    Ok(MeanSem::from_values(&per_frame).expect("non-empty"))
}

/// Fraction of frames whose worst joint error is at most `d`.
pub fn ff(preds: &[Tensor], gts: &[Tensor], layout: &JointLayout, d: f64) -> Result<f64> {
    if !(d >= 0.0) {
        return Err(Error::Parameter(format!("distance must be >= 0, got {d}")));
    }
    let errs = frame_errors(preds, gts, layout)?;
    let within = errs
        .iter()
        .filter(|e| e.iter().copied().fold(0.0, f64::max) <= d)
        .count();
    Ok(within as f64 / errs.len() as f64)
}

/// Per-frame energy score with the Euclidean norm (β = 1), mean ± sem.
pub fn probloss(sets: &[CandidateSet], gts: &[Tensor]) -> Result<MeanSem> {
    if sets.len() != gts.len() {
        return Err(Error::Contract(format!(
            "{} candidate sets for {} ground truths",
            sets.len(),
            gts.len()
        )));
    }
    if sets.is_empty() {
        return Err(Error::Contract("no frames to evaluate".into()));
    }
    let loss = LossSpec::default();
    let values = sets
        .iter()
        .zip(gts)
        .map(|(s, y)| scoring::energy_score_sample(s, y, &loss))
        .collect::<Result<Vec<_>>>()?;
    Ok(MeanSem::from_values(&values).expect("non-empty"))
}

/// Symmetric joint-by-joint correlation matrix; `None` marks entries whose
/// variance was zero for every input.
#[derive(Debug, Clone, PartialEq)]
pub struct PearsonMatrix {
    size: usize,
    entries: Vec<Option<f64>>,
}

impl PearsonMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.entries[i * self.size + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Option<f64>]> {
        self.entries.chunks(self.size)
    }
}

/// Correlation between joints across the `K` candidates of each input,
/// averaged over inputs where it is defined.
///
/// For multi-coordinate joints the per-candidate value is the Euclidean
/// deviation of the joint from its candidate mean; singleton joints use the
/// coordinate itself.
pub fn pearson_matrix(sets: &[CandidateSet], layout: &JointLayout) -> Result<PearsonMatrix> {
    let j = layout.joints();
    let mut sums = vec![0.0; j * j];
    let mut counts = vec![0usize; j * j];
    for set in sets {
        let k = set.k();
        if k < 2 {
            return Err(Error::Estimator {
                required: 2,
                got: k,
            });
        }
        layout.check(set.y_dim())?;
        // values[joint][candidate]
        let mut values = vec![vec![0.0; k]; j];
        for (jj, col) in values.iter_mut().enumerate() {
            let (_, len) = layout.groups[jj];
            if len == 1 {
                for (c, v) in set.candidates.iter().zip(col.iter_mut()) {
                    *v = layout.joint(c.data(), jj)[0];
                }
            } else {
                let mut mean = vec![0.0; len];
                for c in &set.candidates {
                    for (m, x) in mean.iter_mut().zip(layout.joint(c.data(), jj)) {
                        *m += x;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= k as f64);
                for (c, v) in set.candidates.iter().zip(col.iter_mut()) {
                    let p = layout.joint(c.data(), jj);
                    *v = math::sqrt(p.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum());
                }
            }
        }
        let constant: Vec<bool> = values
            .iter()
            .map(|col| col.iter().all(|v| *v == col[0]))
            .collect();
        let centered: Vec<(Vec<f64>, f64)> = values
            .iter()
            .map(|col| {
                let m = col.iter().sum::<f64>() / k as f64;
                let c: Vec<f64> = col.iter().map(|v| v - m).collect();
                let ss = c.iter().map(|v| v * v).sum::<f64>();
                (c, ss)
            })
            .collect();
        for a in 0..j {
            for b in 0..j {
                if constant[a] || constant[b] || centered[a].1 == 0.0 || centered[b].1 == 0.0 {
                    continue;
                }
                let r = if a == b {
                    1.0
                } else {
                    let cov: f64 = centered[a]
                        .0
                        .iter()
                        .zip(&centered[b].0)
                        .map(|(x, y)| x * y)
                        .sum();
                    (cov / math::sqrt(centered[a].1 * centered[b].1)).clamp(-1.0, 1.0)
                };
                sums[a * j + b] += r;
                counts[a * j + b] += 1;
            }
        }
    }
    let entries = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c == 0 { None } else { Some(s / c as f64) })
        .collect();
    Ok(PearsonMatrix { size: j, entries })
}

/// `k` draws of `pointwise + N(0, σ²I)`, turning a point predictor into a
/// candidate set.
pub fn base_candidates<R: RngCore + ?Sized>(
    pointwise: &Tensor,
    k: usize,
    sigma: f64,
    rng: &mut R,
) -> Result<CandidateSet> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Parameter(format!("sigma must be > 0, got {sigma}")));
    }
    if k == 0 {
        return Err(Error::Parameter("K must be at least 1".into()));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Parameter(format!("{e}")))?;
    let cands = (0..k)
        .map(|_| {
            let d = pointwise
                .data()
                .iter()
                .map(|m| m + normal.sample(rng))
                .collect();
            Tensor::vector(d)
        })
        .collect::<Result<Vec<_>>>()?;
    CandidateSet::from_candidates(0, cands)
}

/// How the single pointwise prediction is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PointwiseMode {
    /// MEU among the sampled candidates.
    #[default]
    Meu,
    /// `G(0, x)`; for a noise-free network simply `G(x)`.
    ZeroNoise,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub k: usize,
    pub layout: JointLayout,
    pub distances: Vec<f64>,
    pub pointwise: PointwiseMode,
    /// Gaussian spread used to build candidates for a noise-free network.
    pub base_sigma: Option<f64>,
    pub task_loss: LossSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub frames: usize,
    pub k: usize,
    /// `Err` when the candidate sets cannot support the estimator (K < 2).
    pub probloss: core::result::Result<MeanSem, Error>,
    pub mejee: MeanSem,
    pub majee: MeanSem,
    /// `(distance, fraction)` sorted by distance.
    pub ff: Vec<(f64, f64)>,
    pub pearson: Option<PearsonMatrix>,
}

/// Candidate sets for every example: sampled from the network, or built
/// around `G(x)` with Gaussian noise when the network is noise-free and
/// `base_sigma` is set.
pub fn candidate_sets<R: RngCore + ?Sized>(
    params: &NetworkParams,
    data: &[Example],
    k: usize,
    base_sigma: Option<f64>,
    rng: &mut R,
) -> Result<Vec<CandidateSet>> {
    data.iter()
        .enumerate()
        .map(|(n, ex)| {
            let set = match (params.config().noise_enabled, base_sigma) {
                (false, Some(sigma)) => {
                    let y = netgen::predict(params, &ex.x, None)?;
                    base_candidates(&y, k, sigma, rng)?
                }
                _ => netgen::sample_candidates(params, &ex.x, k, rng)?,
            };
            Ok(set.with_index(n))
        })
        .collect()
}

/// Full evaluation of a network on a dataset.
pub fn evaluate<R: RngCore + ?Sized>(
    params: &NetworkParams,
    data: &[Example],
    opts: &EvalOptions,
    rng: &mut R,
) -> Result<MetricsReport> {
    if data.is_empty() {
        return Err(Error::Contract("no frames to evaluate".into()));
    }
    let cfg = params.config();
    opts.layout.check(cfg.y_dim)?;
    let sets = candidate_sets(params, data, opts.k, opts.base_sigma, rng)?;
    let gts: Vec<Tensor> = data.iter().map(|e| e.y.clone()).collect();

    let preds = match opts.pointwise {
        PointwiseMode::Meu => sets
            .iter()
            .map(|s| meu_predict(s, &opts.task_loss).map(|(_, y)| y))
            .collect::<Result<Vec<_>>>()?,
        PointwiseMode::ZeroNoise => {
            let zero = if cfg.noise_enabled {
                Some(Tensor::zeros(&[cfg.z_dim]))
            } else {
                None
            };
            data.iter()
                .map(|ex| netgen::predict(params, &ex.x, zero.as_ref()))
                .collect::<Result<Vec<_>>>()?
        }
    };

    let mut distances = opts.distances.clone();
    distances.sort_by(|a, b| a.total_cmp(b));
    let ff_curve = distances
        .iter()
        .map(|&d| ff(&preds, &gts, &opts.layout, d).map(|f| (d, f)))
        .collect::<Result<Vec<_>>>()?;

    Ok(MetricsReport {
        frames: data.len(),
        k: opts.k,
        probloss: probloss(&sets, &gts),
        mejee: mejee(&preds, &gts, &opts.layout)?,
        majee: majee(&preds, &gts, &opts.layout)?,
        ff: ff_curve,
        pearson: if opts.k >= 2 {
            Some(pearson_matrix(&sets, &opts.layout)?)
        } else {
            None
        },
    })
}
