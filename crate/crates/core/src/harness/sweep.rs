use serde::{Deserialize, Serialize};

use super::DensityPair;
use crate::classifier::{DiscreteField, LossWeights, MassProfile};
use crate::error::{Error, Result};
use crate::quadrature::QuadratureSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub q: f64,
    /// `(1 - p) N_p(q)`.
    pub false_pos: f64,
    /// `p (1 - P_p(q))`.
    pub false_neg: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub true_p: f64,
    pub rows: Vec<SweepRow>,
    /// First grid point attaining the minimum total.
    pub argmin_q: f64,
    /// Whether every total is within `1e-12` of the minimum.
    pub flat: bool,
}

/// `q = i / 100` for `i = 1..=90`.
pub fn default_q_grid() -> Vec<f64> {
    (1..=90).map(|i| i as f64 / 100.0).collect()
}

/// Binary loss at true prevalence `true_p` of the optimal rule built for each
/// assumed prevalence `q`.
pub fn sweep_loss_vs_q(true_p: f64, q_grid: &[f64], pair: &DensityPair, quad: &QuadratureSpec) -> Result<SweepReport> {
    if !(0.0..=1.0).contains(&true_p) {
        return Err(Error::InvalidParameter(format!("true prevalence must lie in [0, 1], got {true_p}")));
    }
    if q_grid.is_empty() {
        return Err(Error::InvalidParameter("empty q grid".into()));
    }
    if let Some(q) = q_grid.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
        return Err(Error::InvalidParameter(format!("assumed prevalences must lie in (0, 1), got {q}")));
    }
    let field = DiscreteField::new(&pair.pos, &pair.neg, quad)?;
    let profile = MassProfile::new(&field, LossWeights::default())?;
    let rows: Vec<SweepRow> = q_grid
        .iter()
        .map(|&q| {
            let r = profile.binary_loss(q, true_p);
            let false_pos = (1.0 - true_p) * r.false_pos_mass;
            let false_neg = true_p * r.false_neg_mass;
            SweepRow { q, false_pos, false_neg, total: false_pos + false_neg }
        })
        .collect();
    let best = rows.iter().map(|r| r.total).fold(f64::INFINITY, f64::min);
    let argmin_q = rows.iter().find(|r| r.total == best).map(|r| r.q).unwrap_or(f64::NAN);
    let flat = rows.iter().all(|r| r.total - best <= 1e-12);
    Ok(SweepReport { true_p, rows, argmin_q, flat })
}
