//! Seeded experiments: loss-versus-assumed-prevalence sweeps, Monte Carlo
//! error statistics, single-cell optimality checks and the three-sigma
//! baseline comparison.
//!
//! Every trial draws from its own ChaCha stream seeded by mixing the base
//! seed with the trial's coordinates, so results do not depend on thread
//! count or scheduling.

mod baseline;
mod mc;
mod perturb;
mod report;
mod sweep;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density::{Sampler, TruncatedDensity};
use crate::error::{Error, Result};
use crate::geometry::LogPoint;
use crate::quadrature::QuadratureSpec;

pub use baseline::{baseline_comparison, BaselineRow};
pub use mc::{adaptive_trial, mc_error_stats, power_law_exponent, AdaptiveTrial, McCell, McErrorReport};
pub use perturb::{check_labels, perturbation_optimality_check, PerturbationReport, SWAP_TOLERANCE};
pub use report::{mc_csv, sweep_csv};
pub use sweep::{default_q_grid, sweep_loss_vs_q, SweepReport, SweepRow};

/// Positive and negative densities on a shared domain.
#[derive(Debug, Clone)]
pub struct DensityPair {
    pub pos: Arc<TruncatedDensity>,
    pub neg: Arc<TruncatedDensity>,
}

impl DensityPair {
    pub fn new(pos: TruncatedDensity, neg: TruncatedDensity) -> Result<Self> {
        if pos.domain() != neg.domain() {
            return Err(Error::GridMismatch("densities live on different domains".into()));
        }
        Ok(Self { pos: Arc::new(pos), neg: Arc::new(neg) })
    }
}

/// How many positives a mixture draw of size `S` at prevalence `p` contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixtureDraw {
    /// Exactly `round(p S)`.
    FixedCounts,
    /// Each sample independently positive with probability `p`.
    Bernoulli,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub prevalence_grid: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    pub trials: usize,
    pub base_seed: u64,
    pub quad: QuadratureSpec,
    pub draw: MixtureDraw,
    /// Adaptive-mode starting prevalence, tolerance and iteration cap.
    pub p_init: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            prevalence_grid: vec![0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.8, 0.9],
            sample_sizes: vec![100, 178, 316, 562, 1000, 1778, 3162, 5623, 10000],
            trials: 500,
            base_seed: 0,
            quad: QuadratureSpec::default(),
            draw: MixtureDraw::FixedCounts,
            p_init: 0.5,
            tol: 1e-4,
            max_iter: 20,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.prevalence_grid.is_empty() || self.sample_sizes.is_empty() {
            return Err(Error::Config("prevalence and sample-size grids must be non-empty".into()));
        }
        if let Some(p) = self.prevalence_grid.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(Error::Config(format!("prevalences must lie in (0, 1), got {p}")));
        }
        if self.sample_sizes.contains(&0) {
            return Err(Error::Config("sample sizes must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        self.quad.validate()
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for the trial at `coords` under `base`.
pub fn derive_seed(base: u64, coords: &[u64]) -> u64 {
    coords.iter().fold(splitmix64(base), |h, &c| splitmix64(h ^ splitmix64(c)))
}

/// Number of positives in a draw of `s` samples at prevalence `p`.
pub fn positive_count<R: Rng + ?Sized>(draw: MixtureDraw, p: f64, s: usize, rng: &mut R) -> usize {
    match draw {
        MixtureDraw::FixedCounts => ((p * s as f64).round() as usize).min(s),
        MixtureDraw::Bernoulli => (0..s).filter(|_| rng.random::<f64>() < p).count(),
    }
}

/// A labeled draw: `truth[i]` is true for samples from the positive density.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDraw {
    pub points: Vec<LogPoint>,
    pub truth: Vec<bool>,
}

impl LabeledDraw {
    pub fn positives(&self) -> usize {
        self.truth.iter().filter(|t| **t).count()
    }
}

/// `n_pos` positives followed by `n_neg` negatives from one seeded stream.
pub fn draw_counts(pair: &DensityPair, n_pos: usize, n_neg: usize, seed: u64) -> Result<LabeledDraw> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n_pos + n_neg);
    Sampler::new(&pair.pos)?.fill(&mut rng, n_pos, &mut points)?;
    Sampler::new(&pair.neg)?.fill(&mut rng, n_neg, &mut points)?;
    let mut truth = vec![true; n_pos];
    truth.resize(n_pos + n_neg, false);
    Ok(LabeledDraw { points, truth })
}

/// Mixture draw of `s` samples at prevalence `p`.
pub fn draw_mixture(pair: &DensityPair, p: f64, s: usize, draw: MixtureDraw, seed: u64) -> Result<LabeledDraw> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_pos = positive_count(draw, p, s, &mut rng);
    draw_counts(pair, n_pos, s - n_pos, rng.random())
}

/// Sum of `values` in ascending order, independent of their arrangement.
pub fn sorted_sum(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

/// Mean and sample standard deviation, each summed in sorted order.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = sorted_sum(values) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    (mean, (sorted_sum(&sq) / (n - 1.0)).sqrt())
}
