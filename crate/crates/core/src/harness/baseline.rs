use serde::{Deserialize, Serialize};

use super::{derive_seed, draw_mixture, DensityPair, MixtureDraw};
use crate::classifier::{three_sigma_rule, ClassificationRule, DiscreteField, Label};
use crate::error::Result;
use crate::quadrature::QuadratureSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub seed: u64,
    /// Empirical error rates on the draw.
    pub three_sigma_error: f64,
    pub optimal_error: f64,
    /// `three_sigma_error - optimal_error`.
    pub margin: f64,
    /// Binary loss of each rule under the model densities.
    pub three_sigma_loss: f64,
    pub optimal_loss: f64,
}

/// For each of `draws` seeded mixtures of `s` samples at prevalence `p`, fits
/// the three-sigma rectangle to the draw's negatives and compares its errors
/// with those of the optimal binary rule at `p`.
pub fn baseline_comparison(
    pair: &DensityPair,
    p: f64,
    s: usize,
    draws: usize,
    base_seed: u64,
    quad: &QuadratureSpec,
) -> Result<Vec<BaselineRow>> {
    let rule = ClassificationRule::binary(p, pair.pos.clone(), pair.neg.clone())?;
    let field = DiscreteField::for_rule(&rule, quad)?;
    let optimal_loss = field.masses(&field.labels(&rule))?.binary_loss(p, rule.weights());
    (0..draws as u64)
        .map(|i| {
            let seed = derive_seed(base_seed, &[i]);
            let draw = draw_mixture(pair, p, s, MixtureDraw::FixedCounts, seed)?;
            let negatives: Vec<_> =
                draw.points.iter().zip(&draw.truth).filter(|(_, t)| !**t).map(|(r, _)| *r).collect();
            let box_rule = three_sigma_rule(&negatives)?;
            let mut box_wrong = 0usize;
            let mut opt_wrong = 0usize;
            for (r, &truth) in draw.points.iter().zip(&draw.truth) {
                box_wrong += usize::from((box_rule.classify(*r) == Label::Positive) != truth);
                opt_wrong += usize::from((rule.classify(*r)? == Label::Positive) != truth);
            }
            let box_labels: Vec<Label> = (0..field.len()).map(|k| box_rule.classify(field.grid().point(k))).collect();
            let three_sigma_loss = field.masses(&box_labels)?.binary_loss(p, rule.weights());
            let three_sigma_error = box_wrong as f64 / s as f64;
            let optimal_error = opt_wrong as f64 / s as f64;
            Ok(BaselineRow {
                seed,
                three_sigma_error,
                optimal_error,
                margin: three_sigma_error - optimal_error,
                three_sigma_loss,
                optimal_loss,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::tests::pair;
    use super::*;
    use crate::fixtures::PANEL_PREVALENCE;

    #[test]
    fn box_rule_never_beats_the_optimum_in_model_loss() {
        let rows = baseline_comparison(&pair(128), PANEL_PREVALENCE, 2_000, 4, 1, &QuadratureSpec::gauss_legendre(128))
            .unwrap();
        for r in rows {
            assert!(r.three_sigma_loss >= r.optimal_loss, "{r:?}");
        }
    }
}
