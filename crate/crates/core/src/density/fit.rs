//! Maximum-likelihood fitting of the parametric families.
//!
//! The likelihood is the untruncated analytic density in rotated
//! coordinates; truncation and renormalization happen afterwards through
//! [`super::normalize`]. Positive parameters are optimized in log space.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::params::{ModelFamily, NegativeModelParams, ParametricModel, PositiveModelParams};
use crate::error::{Error, Result};
use crate::geometry::LogPoint;
use crate::simplex::{minimize, SimplexOptions};

pub const MIN_FIT_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub max_iter: usize,
    pub diameter_tol: f64,
    pub restarts: usize,
    /// Standard deviation of restart perturbations in log-parameter space.
    pub restart_spread: f64,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { max_iter: 2000, diameter_tol: 1e-6, restarts: 5, restart_spread: 0.3, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: ParametricModel,
    pub family: ModelFamily,
    pub log_likelihood: f64,
    pub init_log_likelihood: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// False when the best run hit `max_iter`; the parameters are then the
    /// best found so far.
    pub converged: bool,
    /// Points outside the family's support, left out of the likelihood.
    pub excluded_points: usize,
    pub used_points: usize,
}

/// Fits `init`'s family to `points`.
pub fn fit_mle(points: &[LogPoint], init: &ParametricModel, opts: &FitOptions) -> Result<FitResult> {
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::Precondition(format!(
            "maximum-likelihood fit needs at least {MIN_FIT_POINTS} points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points.iter().find(|p| !p.is_finite()) {
        return Err(Error::Precondition(format!("non-finite point ({}, {})", p.lx, p.ly)));
    }
    init.validate()?;
    match init {
        ParametricModel::Negative(p) => {
            let obj = NegativeObjective::new(points);
            check_usable(obj.n, points.len())?;
            let x0 = NegativeObjective::encode(p);
            let (x, run) = optimize(|x| -obj.log_likelihood(x), &x0, &[0.1; 5], &[3], opts);
            Ok(FitResult {
                model: ParametricModel::Negative(NegativeObjective::decode(&x)),
                family: ModelFamily::Negative,
                log_likelihood: -run.value,
                init_log_likelihood: obj.log_likelihood(&x0),
                iterations: run.iterations,
                evaluations: run.evaluations,
                converged: run.converged,
                excluded_points: points.len() - obj.n,
                used_points: obj.n,
            })
        }
        ParametricModel::Positive(p) => {
            let obj = PositiveObjective::new(points, p.z_scale);
            check_usable(obj.n, points.len())?;
            let x0 = PositiveObjective::encode(p);
            let (x, run) = optimize(|x| -obj.log_likelihood(x), &x0, &[0.1; 4], &[3], opts);
            Ok(FitResult {
                model: ParametricModel::Positive(PositiveObjective::decode(&x, p.z_scale)),
                family: ModelFamily::Positive,
                log_likelihood: -run.value,
                init_log_likelihood: obj.log_likelihood(&x0),
                iterations: run.iterations,
                evaluations: run.evaluations,
                converged: run.converged,
                excluded_points: points.len() - obj.n,
                used_points: obj.n,
            })
        }
    }
}

/// Log-likelihood of `points` under the untruncated model, skipping points
/// outside its support.
pub fn log_likelihood(points: &[LogPoint], model: &ParametricModel) -> f64 {
    match model {
        ParametricModel::Negative(p) => NegativeObjective::new(points).log_likelihood(&NegativeObjective::encode(p)),
        ParametricModel::Positive(p) => {
            PositiveObjective::new(points, p.z_scale).log_likelihood(&PositiveObjective::encode(p))
        }
    }
}

/// Moment-based starting point for `family`.
pub fn initial_guess(points: &[LogPoint], family: ModelFamily, z_scale: f64) -> Result<ParametricModel> {
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::Precondition(format!(
            "need at least {MIN_FIT_POINTS} points for an initial guess, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mean = |f: &dyn Fn(&LogPoint) -> f64| points.iter().map(f).sum::<f64>() / n;
    match family {
        ModelFamily::Negative => {
            let mz = mean(&|p| p.diagonal());
            let vz = mean(&|p| (p.diagonal() - mz).powi(2)).max(1e-12);
            let mw = mean(&|p| p.cross());
            let sw = mean(&|p| (p.cross() - mw).powi(2)).sqrt().max(1e-6);
            let beta = 3.0;
            Ok(ParametricModel::Negative(NegativeModelParams {
                theta: vz / mz.max(1e-6),
                k: mz * mz / vz,
                alpha: sw * (-mz / beta).exp(),
                mu: mw,
                beta,
            }))
        }
        ModelFamily::Positive => {
            let mz = mean(&|p| p.diagonal() / z_scale).clamp(1e-3, 1.0 - 1e-3);
            let vz = mean(&|p| (p.diagonal() / z_scale - mz).powi(2)).max(1e-9);
            let common = (mz * (1.0 - mz) / vz - 1.0).max(0.5);
            let mw = mean(&|p| p.cross());
            let sw = mean(&|p| (p.cross() - mw).powi(2)).sqrt().max(1e-6);
            Ok(ParametricModel::Positive(PositiveModelParams {
                alpha: mz * common,
                beta_shape: (1.0 - mz) * common,
                theta: sw / mz.sqrt(),
                mu: mw,
                z_scale,
            }))
        }
        ModelFamily::Gridded => Err(Error::Config("gridded densities are not fitted".into())),
    }
}

fn check_usable(used: usize, total: usize) -> Result<()> {
    if used < MIN_FIT_POINTS {
        return Err(Error::Precondition(format!("only {used} of {total} points lie inside the family's support")));
    }
    Ok(())
}

struct Run {
    value: f64,
    iterations: usize,
    evaluations: usize,
    converged: bool,
}

/// One run from `x0`, `restarts` runs from perturbations of `x0`, then a
/// polishing run from the best vertex found.
fn optimize<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    steps: &[f64],
    unlogged: &[usize],
    opts: &FitOptions,
) -> (Vec<f64>, Run) {
    let simplex = SimplexOptions { max_iter: opts.max_iter, diameter_tol: opts.diameter_tol };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![x0.to_vec()];
    for _ in 0..opts.restarts {
        starts.push(
            x0.iter()
                .enumerate()
                .map(|(i, v)| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    // location parameters move on an absolute scale
                    let scale = if unlogged.contains(&i) { 0.1 } else { opts.restart_spread };
                    v + scale * e
                })
                .collect(),
        );
    }
    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    let mut iterations = 0;
    let mut evaluations = 0;
    for s in &starts {
        let r = minimize(&f, s, steps, &simplex);
        iterations += r.iterations;
        evaluations += r.evaluations;
        if best.as_ref().is_none_or(|b| r.value < b.1) {
            best = Some((r.x, r.value, r.converged));
        }
    }
    let (bx, bv, bc) = best.expect("at least one run");
    let polish = minimize(&f, &bx, &[0.01; 8][..steps.len()], &simplex);
    iterations += polish.iterations;
    evaluations += polish.evaluations;
    let (x, value, converged) =
        if polish.value <= bv { (polish.x, polish.value, polish.converged) } else { (bx, bv, bc) };
    (x, Run { value, iterations, evaluations, converged })
}

struct NegativeObjective {
    n: usize,
    z: Vec<f64>,
    w: Vec<f64>,
    sum_z: f64,
    sum_ln_z: f64,
}

impl NegativeObjective {
    fn new(points: &[LogPoint]) -> Self {
        let (z, w): (Vec<f64>, Vec<f64>) =
            points.iter().map(|p| (p.diagonal(), p.cross())).filter(|(z, _)| *z > 0.0).unzip();
        let sum_z = z.iter().sum();
        let sum_ln_z = z.iter().map(|z| z.ln()).sum();
        Self { n: z.len(), z, w, sum_z, sum_ln_z }
    }

    fn encode(p: &NegativeModelParams) -> Vec<f64> {
        vec![p.theta.ln(), p.k.ln(), p.alpha.ln(), p.mu, p.beta.ln()]
    }

    fn decode(x: &[f64]) -> NegativeModelParams {
        NegativeModelParams { theta: x[0].exp(), k: x[1].exp(), alpha: x[2].exp(), mu: x[3], beta: x[4].exp() }
    }

    fn log_likelihood(&self, x: &[f64]) -> f64 {
        let p = Self::decode(x);
        let n = self.n as f64;
        let two_over_beta = 2.0 / p.beta;
        let (mut s2, mut s1, mut s0) = (0.0, 0.0, 0.0);
        for (z, w) in self.z.iter().zip(&self.w) {
            let e = (-two_over_beta * z).exp();
            s2 += e * w * w;
            s1 += e * w;
            s0 += e;
        }
        let quad = s2 - 2.0 * p.mu * s1 + p.mu * p.mu * s0;
        (p.k - 1.0) * self.sum_ln_z
            - (1.0 / p.theta + 1.0 / p.beta) * self.sum_z
            - n * (ln_gamma(p.k) + p.k * x[0] + 0.5 * (2.0 * PI).ln() + x[2])
            - quad / (2.0 * p.alpha * p.alpha)
    }
}

struct PositiveObjective {
    n: usize,
    z_scale: f64,
    sum_ln_z: f64,
    sum_ln_1mz: f64,
    sum_w2_over_z: f64,
    sum_w_over_z: f64,
    sum_inv_z: f64,
}

impl PositiveObjective {
    fn new(points: &[LogPoint], z_scale: f64) -> Self {
        let mut s = Self {
            n: 0,
            z_scale,
            sum_ln_z: 0.0,
            sum_ln_1mz: 0.0,
            sum_w2_over_z: 0.0,
            sum_w_over_z: 0.0,
            sum_inv_z: 0.0,
        };
        for p in points {
            let z = p.diagonal() / z_scale;
            if !(z > 0.0 && z < 1.0) {
                continue;
            }
            let w = p.cross();
            s.n += 1;
            s.sum_ln_z += z.ln();
            s.sum_ln_1mz += (-z).ln_1p();
            s.sum_w2_over_z += w * w / z;
            s.sum_w_over_z += w / z;
            s.sum_inv_z += 1.0 / z;
        }
        s
    }

    fn encode(p: &PositiveModelParams) -> Vec<f64> {
        vec![p.alpha.ln(), p.beta_shape.ln(), p.theta.ln(), p.mu]
    }

    fn decode(x: &[f64], z_scale: f64) -> PositiveModelParams {
        PositiveModelParams { alpha: x[0].exp(), beta_shape: x[1].exp(), theta: x[2].exp(), mu: x[3], z_scale }
    }

    fn log_likelihood(&self, x: &[f64]) -> f64 {
        let p = Self::decode(x, self.z_scale);
        let n = self.n as f64;
        let quad = self.sum_w2_over_z - 2.0 * p.mu * self.sum_w_over_z + p.mu * p.mu * self.sum_inv_z;
        n * (ln_gamma(p.alpha + p.beta_shape) - ln_gamma(p.alpha) - ln_gamma(p.beta_shape))
            + (p.alpha - 1.0) * self.sum_ln_z
            + (p.beta_shape - 1.0) * self.sum_ln_1mz
            - n * (self.z_scale.ln() + x[2] + 0.5 * (2.0 * PI).ln())
            - 0.5 * self.sum_ln_z
            - quad / (2.0 * p.theta * p.theta)
    }
}
