use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, draw_mixture, mean_sd, DensityPair, ExperimentConfig, LabeledDraw};
use crate::classifier::Label;
use crate::error::Result;
use crate::prevalence::{AdaptiveOptions, AdaptiveSolver};

/// Outcome of classifying one labeled draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveTrial {
    pub p_hat: f64,
    pub false_pos: usize,
    pub false_neg: usize,
    pub holdout: usize,
    pub iterations: usize,
    pub converged: bool,
}

impl AdaptiveTrial {
    pub fn error_rate(&self, samples: usize) -> f64 {
        (self.false_pos + self.false_neg) as f64 / samples as f64
    }
}

fn count_errors(draw: &LabeledDraw, labels: impl Iterator<Item = Label>) -> (usize, usize, usize) {
    let (mut fp, mut fnn, mut h) = (0, 0, 0);
    for (label, &truth) in labels.zip(&draw.truth) {
        match (label, truth) {
            (Label::Positive, false) => fp += 1,
            (Label::Negative, true) => fnn += 1,
            (Label::Holdout, _) => h += 1,
            _ => {}
        }
    }
    (fp, fnn, h)
}

/// Runs the adaptive loop on `draw` and scores its final labels.
pub fn adaptive_trial(solver: &AdaptiveSolver, draw: &LabeledDraw) -> Result<AdaptiveTrial> {
    let values = solver.point_values(&draw.points)?;
    let (trace, converged) = solver.iterate(&values)?;
    let p_hat = trace.last().expect("at least one iteration").p_hat;
    let rule = solver.rule(p_hat)?;
    let (false_pos, false_neg, holdout) = count_errors(draw, values.iter().map(|&(pv, nv)| rule.decide(pv, nv)));
    Ok(AdaptiveTrial { p_hat, false_pos, false_neg, holdout, iterations: trace.len(), converged })
}

/// Known prevalence: label with the optimal rule at the true `p`, and
/// estimate `p` from that same rule.
fn known_trial(solver: &AdaptiveSolver, draw: &LabeledDraw, p: f64) -> Result<AdaptiveTrial> {
    let values = solver.point_values(&draw.points)?;
    let rule = solver.rule(p)?;
    let (false_pos, false_neg, holdout) = count_errors(draw, values.iter().map(|&(pv, nv)| rule.decide(pv, nv)));
    let p_hat = solver.estimate_at(p, &values)?.p_hat;
    Ok(AdaptiveTrial { p_hat, false_pos, false_neg, holdout, iterations: 0, converged: true })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McCell {
    pub p: f64,
    pub s: usize,
    /// Trials that completed; estimator failures are excluded.
    pub trials: usize,
    pub failures: usize,
    pub mean_error: f64,
    pub std_error: f64,
    pub mean_plus_3sigma: f64,
    pub mean_p_hat: f64,
    pub std_p_hat: f64,
    /// `|mean| + 3 sd` of the relative prevalence error `(p_hat - p) / p`.
    pub rel_prev_error_3sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McErrorReport {
    pub known_prevalence: bool,
    pub cells: Vec<McCell>,
    /// Per prevalence: fitted exponent of `std_error` against `S`.
    pub error_exponents: Vec<(f64, Option<f64>)>,
    /// Per prevalence: fitted exponent of `std_p_hat` against `S`.
    pub p_hat_exponents: Vec<(f64, Option<f64>)>,
}

impl McErrorReport {
    pub fn cell(&self, p: f64, s: usize) -> Option<&McCell> {
        self.cells.iter().find(|c| c.p == p && c.s == s)
    }
}

/// Least-squares slope of `ln sd` against `ln S`; `None` with fewer than four
/// usable sizes.
pub fn power_law_exponent(sizes: &[usize], sd: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = sizes
        .iter()
        .zip(sd)
        .filter(|(_, v)| **v > 0.0 && v.is_finite())
        .map(|(s, v)| ((*s as f64).ln(), v.ln()))
        .collect();
    if pts.len() < 4 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Monte Carlo error statistics over the `(p, S)` grid of `cfg`.
///
/// With `known_prevalence` each draw is labeled by the optimal rule at the
/// true prevalence; otherwise by the adaptive loop. Trials whose estimator
/// fails are counted in `failures` and left out of the statistics.
pub fn mc_error_stats(cfg: &ExperimentConfig, pair: &DensityPair, known_prevalence: bool) -> Result<McErrorReport> {
    cfg.validate()?;
    let opts = AdaptiveOptions {
        p_init: cfg.p_init,
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        quad: cfg.quad,
        ..Default::default()
    };
    let solver = AdaptiveSolver::new(pair.pos.clone(), pair.neg.clone(), opts)?;
    let mut cells = Vec::new();
    for (pi, &p) in cfg.prevalence_grid.iter().enumerate() {
        for (si, &s) in cfg.sample_sizes.iter().enumerate() {
            let outcomes: Vec<Result<AdaptiveTrial>> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let seed = derive_seed(cfg.base_seed, &[pi as u64, si as u64, t as u64]);
                    let draw = draw_mixture(pair, p, s, cfg.draw, seed)?;
                    if known_prevalence {
                        known_trial(&solver, &draw, p)
                    } else {
                        adaptive_trial(&solver, &draw)
                    }
                })
                .collect();
            let mut ok = Vec::with_capacity(outcomes.len());
            let mut failures = 0;
            for o in outcomes {
                match o {
                    Ok(t) => ok.push(t),
                    Err(e) if e.class() == crate::error::ErrorClass::Numerical => failures += 1,
                    Err(e) => return Err(e),
                }
            }
            let errors: Vec<f64> = ok.iter().map(|t| t.error_rate(s)).collect();
            let p_hats: Vec<f64> = ok.iter().map(|t| t.p_hat).collect();
            let rel: Vec<f64> = p_hats.iter().map(|e| (e - p) / p).collect();
            let (mean_error, std_error) = mean_sd(&errors);
            let (mean_p_hat, std_p_hat) = mean_sd(&p_hats);
            let (rel_mean, rel_sd) = mean_sd(&rel);
            cells.push(McCell {
                p,
                s,
                trials: ok.len(),
                failures,
                mean_error,
                std_error,
                mean_plus_3sigma: mean_error + 3.0 * std_error,
                mean_p_hat,
                std_p_hat,
                rel_prev_error_3sigma: rel_mean.abs() + 3.0 * rel_sd,
            });
        }
    }
    let exponents = |f: fn(&McCell) -> f64| -> Vec<(f64, Option<f64>)> {
        cfg.prevalence_grid
            .iter()
            .map(|&p| {
                let row: Vec<&McCell> = cells.iter().filter(|c| c.p == p).collect();
                let sizes: Vec<usize> = row.iter().map(|c| c.s).collect();
                let sd: Vec<f64> = row.iter().map(|c| f(c)).collect();
                (p, power_law_exponent(&sizes, &sd))
            })
            .collect()
    };
    let error_exponents = exponents(|c| c.std_error);
    let p_hat_exponents = exponents(|c| c.std_p_hat);
    Ok(McErrorReport { known_prevalence, cells, error_exponents, p_hat_exponents })
}
