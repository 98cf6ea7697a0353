use serde::{Deserialize, Serialize};

use crate::classifier::{ClassificationRule, DiscreteField, Label, LossWeights, PrevalenceInterval, RuleKind};
use crate::error::{Error, Result};
use crate::quadrature::QuadratureSpec;

/// Largest loss decrease a single swap may show and still pass.
pub const SWAP_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub nodes_per_axis: usize,
    pub swaps: usize,
    /// Largest decrease of the discretized loss over all single-cell swaps;
    /// non-positive when the rule is optimal on the grid.
    pub max_decrease: f64,
    /// Swaps that leave the loss unchanged.
    pub neutral_swaps: usize,
    pub passed: bool,
}

/// Moves every quadrature cell, one at a time, from the rule's label to each
/// other label allowed by the loss, and records the change of the
/// discretized loss. Binary rules swap between positive and negative;
/// ternary rules between all three labels.
pub fn perturbation_optimality_check(rule: &ClassificationRule, quad: &QuadratureSpec) -> Result<PerturbationReport> {
    let field = DiscreteField::for_rule(rule, quad)?;
    let labels = field.labels(rule);
    check_labels(rule, &field, &labels, quad.nodes_per_axis)
}

/// The same swap scan for an arbitrary labeling, scored with `rule`'s loss.
pub fn check_labels(
    rule: &ClassificationRule,
    field: &DiscreteField,
    labels: &[Label],
    nodes_per_axis: usize,
) -> Result<PerturbationReport> {
    if labels.len() != field.len() {
        return Err(Error::GridMismatch(format!("{} labels for {} nodes", labels.len(), field.len())));
    }
    let LossWeights { w_fp, w_fn } = rule.weights();
    // per-label cost density at a node, before the quadrature weight
    let cost = |label: Label, pv: f64, nv: f64| -> f64 {
        match rule.kind() {
            RuleKind::Binary { p } => match label {
                Label::Positive => w_fp * (1.0 - p) * nv,
                Label::Negative => w_fn * p * pv,
                Label::Holdout => f64::NAN,
            },
            RuleKind::Ternary(PrevalenceInterval { p_lo, p_hi }) => match label {
                Label::Positive => w_fp * (1.0 - p_lo) * nv - p_lo * pv,
                Label::Negative => w_fn * p_hi * pv - (1.0 - p_hi) * nv,
                Label::Holdout => 0.0,
            },
        }
    };
    let alternatives: &[Label] = match rule.kind() {
        RuleKind::Binary { .. } => &[Label::Positive, Label::Negative],
        RuleKind::Ternary(_) => &[Label::Positive, Label::Negative, Label::Holdout],
    };
    let (pos, neg, weights) = (field.pos_values(), field.neg_values(), field.weights());
    let mut max_decrease = f64::NEG_INFINITY;
    let mut swaps = 0;
    let mut neutral_swaps = 0;
    for i in 0..field.len() {
        let current = cost(labels[i], pos[i], neg[i]);
        for &alt in alternatives.iter().filter(|&&l| l != labels[i]) {
            let decrease = weights[i] * (current - cost(alt, pos[i], neg[i]));
            swaps += 1;
            if decrease == 0.0 {
                neutral_swaps += 1;
            }
            max_decrease = max_decrease.max(decrease);
        }
    }
    Ok(PerturbationReport {
        nodes_per_axis,
        swaps,
        max_decrease,
        neutral_swaps,
        passed: max_decrease <= SWAP_TOLERANCE,
    })
}
