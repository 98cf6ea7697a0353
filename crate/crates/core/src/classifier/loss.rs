//! Region masses and loss functionals on the tensor quadrature grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ClassificationRule, Label, LossWeights, PrevalenceInterval, RuleKind};
use crate::density::TruncatedDensity;
use crate::error::{Error, Result};
use crate::quadrature::{QuadratureSpec, TensorGrid};

/// Both densities and the quadrature weights at every grid node.
#[derive(Debug, Clone)]
pub struct DiscreteField {
    grid: TensorGrid,
    pos: Vec<f64>,
    neg: Vec<f64>,
    weights: Vec<f64>,
    converged: bool,
}

impl DiscreteField {
    pub fn new(pos: &TruncatedDensity, neg: &TruncatedDensity, quad: &QuadratureSpec) -> Result<Self> {
        if pos.domain() != neg.domain() {
            return Err(Error::GridMismatch("densities live on different domains".into()));
        }
        let grid = TensorGrid::new(quad, pos.domain())?;
        let pos_values = grid.evaluate(|r| pos.density(r));
        let neg_values = grid.evaluate(|r| neg.density(r));
        let weights = (0..grid.len()).map(|i| grid.weight(i)).collect();
        Ok(Self {
            grid,
            pos: pos_values,
            neg: neg_values,
            weights,
            converged: pos.normalization().converged && neg.normalization().converged,
        })
    }

    pub fn for_rule(rule: &ClassificationRule, quad: &QuadratureSpec) -> Result<Self> {
        Self::new(rule.pos(), rule.neg(), quad)
    }

    pub fn grid(&self) -> &TensorGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn pos_values(&self) -> &[f64] {
        &self.pos
    }

    pub fn neg_values(&self) -> &[f64] {
        &self.neg
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Whether both densities passed their normalization refinement check.
    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn labels(&self, rule: &ClassificationRule) -> Vec<Label> {
        self.pos.par_iter().zip(self.neg.par_iter()).map(|(&pv, &nv)| rule.decide(pv, nv)).collect()
    }

    /// Masses of both densities over the regions `labels` induce. Summed in
    /// node order.
    pub fn masses(&self, labels: &[Label]) -> Result<DomainMasses> {
        if labels.len() != self.len() {
            return Err(Error::GridMismatch(format!("{} labels for a field of {} nodes", labels.len(), self.len())));
        }
        let mut m = DomainMasses::default();
        for (i, label) in labels.iter().enumerate() {
            let (wp, wn) = (self.weights[i] * self.pos[i], self.weights[i] * self.neg[i]);
            match label {
                Label::Positive => {
                    m.p_p += wp;
                    m.n_p += wn;
                }
                Label::Negative => {
                    m.p_n += wp;
                    m.n_n += wn;
                }
                Label::Holdout => {
                    m.p_h += wp;
                    m.n_h += wn;
                }
            }
        }
        Ok(m)
    }
}

/// Mass of the positive (`p_*`) and negative (`n_*`) density over the
/// positive, negative and holdout regions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DomainMasses {
    pub p_p: f64,
    pub n_p: f64,
    pub p_n: f64,
    pub n_n: f64,
    pub p_h: f64,
    pub n_h: f64,
}

impl DomainMasses {
    pub fn pos_total(&self) -> f64 {
        self.p_p + self.p_n + self.p_h
    }

    pub fn neg_total(&self) -> f64 {
        self.n_p + self.n_n + self.n_h
    }

    /// Weighted binary loss at true prevalence `p`.
    pub fn binary_loss(&self, p: f64, w: LossWeights) -> f64 {
        w.w_fp * (1.0 - p) * self.n_p + w.w_fn * p * self.p_n
    }

    /// Weighted ternary loss over `interval`.
    pub fn ternary_loss(&self, interval: PrevalenceInterval, w: LossWeights) -> f64 {
        let PrevalenceInterval { p_lo, p_hi } = interval;
        w.w_fp * (1.0 - p_lo) * self.n_p + w.w_fn * p_hi * self.p_n - p_lo * self.p_p - (1.0 - p_hi) * self.n_n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    /// Negative-density mass inside the positive region.
    pub false_pos_mass: f64,
    /// Positive-density mass inside the negative region.
    pub false_neg_mass: f64,
    pub total: f64,
    pub holdout_mass_pos: f64,
    pub holdout_mass_neg: f64,
    /// False when either density failed its normalization refinement check.
    pub converged: bool,
}

impl LossReport {
    pub fn from_masses(m: &DomainMasses, p: f64, w: LossWeights, converged: bool) -> Self {
        Self {
            false_pos_mass: m.n_p,
            false_neg_mass: m.p_n,
            total: m.binary_loss(p, w),
            holdout_mass_pos: m.p_h,
            holdout_mass_neg: m.n_h,
            converged,
        }
    }
}

fn binary_prevalence(rule: &ClassificationRule) -> Result<f64> {
    match rule.kind() {
        RuleKind::Binary { p } => Ok(p),
        RuleKind::Ternary(_) => Err(Error::InvalidParameter("binary loss needs a binary rule".into())),
    }
}

fn ternary_interval(rule: &ClassificationRule) -> Result<PrevalenceInterval> {
    match rule.kind() {
        RuleKind::Ternary(i) => Ok(i),
        RuleKind::Binary { .. } => Err(Error::InvalidParameter("ternary loss needs a ternary rule".into())),
    }
}

pub fn loss_binary(rule: &ClassificationRule, quad: &QuadratureSpec) -> Result<LossReport> {
    binary_prevalence(rule)?;
    let field = DiscreteField::for_rule(rule, quad)?;
    let labels = field.labels(rule);
    loss_binary_with_labels(rule, &field, &labels)
}

/// Binary loss of `rule`'s prevalence and weights over arbitrary regions.
pub fn loss_binary_with_labels(
    rule: &ClassificationRule,
    field: &DiscreteField,
    labels: &[Label],
) -> Result<LossReport> {
    let p = binary_prevalence(rule)?;
    let m = field.masses(labels)?;
    Ok(LossReport::from_masses(&m, p, rule.weights(), field.converged()))
}

pub fn loss_ternary(rule: &ClassificationRule, quad: &QuadratureSpec) -> Result<f64> {
    let field = DiscreteField::for_rule(rule, quad)?;
    let labels = field.labels(rule);
    loss_ternary_with_labels(rule, &field, &labels)
}

pub fn loss_ternary_with_labels(rule: &ClassificationRule, field: &DiscreteField, labels: &[Label]) -> Result<f64> {
    let interval = ternary_interval(rule)?;
    Ok(field.masses(labels)?.ternary_loss(interval, rule.weights()))
}

pub fn domain_masses(rule: &ClassificationRule, quad: &QuadratureSpec) -> Result<DomainMasses> {
    let field = DiscreteField::for_rule(rule, quad)?;
    field.masses(&field.labels(rule))
}

/// Grid nodes sorted by likelihood ratio with suffix masses, giving the
/// positive-region masses `(P_p, N_p)` of the binary rule at any prevalence
/// in `O(log n)`.
#[derive(Debug, Clone)]
pub struct MassProfile {
    /// `(P, N)` per node in ascending ratio order.
    values: Vec<(f64, f64)>,
    /// `suffix[i]` holds the weighted masses of nodes `i..`.
    suffix: Vec<(f64, f64)>,
    weights: LossWeights,
}

impl MassProfile {
    pub fn new(field: &DiscreteField, weights: LossWeights) -> Result<Self> {
        weights.validate()?;
        let mut nodes: Vec<(f64, f64, f64)> = (0..field.len())
            .map(|i| {
                let (pv, nv) = (field.pos[i], field.neg[i]);
                let key = if pv == 0.0 {
                    -1.0
                } else if nv == 0.0 {
                    f64::INFINITY
                } else {
                    pv / nv
                };
                (key, pv, i as f64)
            })
            .collect();
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.total_cmp(&b.2)));
        let values: Vec<(f64, f64)> =
            nodes.iter().map(|&(_, _, i)| (field.pos[i as usize], field.neg[i as usize])).collect();
        let mut suffix = vec![(0.0, 0.0); values.len() + 1];
        for k in (0..values.len()).rev() {
            let i = nodes[k].2 as usize;
            let w = field.weights[i];
            suffix[k] = (suffix[k + 1].0 + w * values[k].0, suffix[k + 1].1 + w * values[k].1);
        }
        Ok(Self { values, suffix, weights })
    }

    /// `(P_p, N_p)` for the binary rule at prevalence `q`.
    pub fn positive_masses(&self, q: f64) -> (f64, f64) {
        let LossWeights { w_fp, w_fn } = self.weights;
        let a = w_fn * q;
        let b = w_fp * (1.0 - q);
        let idx = self.values.partition_point(|&(pv, nv)| !(a * pv > b * nv));
        self.suffix[idx]
    }

    /// Binary loss at true prevalence `p` of the rule built for prevalence `q`.
    pub fn binary_loss(&self, q: f64, p: f64) -> LossReport {
        let (p_p, n_p) = self.positive_masses(q);
        let (p_tot, n_tot) = self.suffix[0];
        let m = DomainMasses { p_p, n_p, p_n: p_tot - p_p, n_n: n_tot - n_p, p_h: 0.0, n_h: 0.0 };
        LossReport::from_masses(&m, p, self.weights, true)
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::{fixture_pair, uniform};
    use super::*;
    use crate::fixtures::PANEL_PREVALENCE;

    fn quad() -> QuadratureSpec {
        QuadratureSpec::gauss_legendre(128)
    }

    #[test]
    fn all_holdout_regions_have_zero_loss() {
        let (pos, neg) = fixture_pair();
        let rule = ClassificationRule::binary(0.3, pos.clone(), neg.clone()).unwrap();
        let field = DiscreteField::for_rule(&rule, &quad()).unwrap();
        let labels = vec![Label::Holdout; field.len()];
        assert_eq!(loss_binary_with_labels(&rule, &field, &labels).unwrap().total, 0.0);
        let ter = ClassificationRule::ternary(0.1, 0.6, pos, neg).unwrap();
        assert_eq!(loss_ternary_with_labels(&ter, &field, &labels).unwrap(), 0.0);
    }

    #[test]
    fn all_positive_regions_cost_one_minus_p() {
        let (pos, neg) = fixture_pair();
        let p = 0.3;
        let rule = ClassificationRule::binary(p, pos, neg).unwrap();
        let field = DiscreteField::for_rule(&rule, &quad()).unwrap();
        let labels = vec![Label::Positive; field.len()];
        let r = loss_binary_with_labels(&rule, &field, &labels).unwrap();
        assert!((r.total - (1.0 - p)).abs() < 1e-9);
    }

    #[test]
    fn identical_densities_cost_one_half() {
        let u = uniform();
        let rule = ClassificationRule::binary(0.5, u.clone(), u).unwrap();
        let r = loss_binary(&rule, &quad()).unwrap();
        assert!((r.total - 0.5).abs() < 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn zero_prevalence_masses() {
        let (pos, neg) = fixture_pair();
        let rule = ClassificationRule::binary(0.0, pos, neg).unwrap();
        let m = domain_masses(&rule, &quad()).unwrap();
        assert!((m.n_n - 1.0).abs() < 1e-9 && (m.p_n - 1.0).abs() < 1e-9);
        assert_eq!((m.p_p, m.n_p, m.p_h, m.n_h), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn ternary_loss_matches_term_by_term_quadrature() {
        let (pos, neg) = fixture_pair();
        let p = 0.2;
        let rule = ClassificationRule::ternary(p, p, pos.clone(), neg.clone()).unwrap();
        let lt = loss_ternary(&rule, &quad()).unwrap();
        // independent evaluation: indicator-weighted integrals on a fresh grid
        let grid = TensorGrid::new(&quad(), pos.domain()).unwrap();
        let in_pos = |r| p * pos.density(r) > (1.0 - p) * neg.density(r);
        let in_neg = |r| (1.0 - p) * neg.density(r) > p * pos.density(r);
        let np = grid.integrate(|r| if in_pos(r) { neg.density(r) } else { 0.0 });
        let pn = grid.integrate(|r| if in_neg(r) { pos.density(r) } else { 0.0 });
        let pp = grid.integrate(|r| if in_pos(r) { pos.density(r) } else { 0.0 });
        let nn = grid.integrate(|r| if in_neg(r) { neg.density(r) } else { 0.0 });
        let expected = (1.0 - p) * np + p * pn - p * pp - (1.0 - p) * nn;
        assert!((lt - expected).abs() < 1e-12, "{lt} vs {expected}");
        let lb = loss_binary(&ClassificationRule::binary(p, pos, neg).unwrap(), &quad()).unwrap().total;
        assert!((lt - (lb - p * pp - (1.0 - p) * nn)).abs() < 1e-12);
    }

    #[test]
    fn positive_mass_grows_with_prevalence() {
        let (pos, neg) = fixture_pair();
        let mut last = 0.0;
        for i in 1..=9 {
            let rule = ClassificationRule::binary(0.1 * i as f64, pos.clone(), neg.clone()).unwrap();
            let m = domain_masses(&rule, &quad()).unwrap();
            assert!(m.p_p >= last);
            last = m.p_p;
        }
    }

    #[test]
    fn profile_agrees_with_labels() {
        let (pos, neg) = fixture_pair();
        let rule = ClassificationRule::binary(0.5, pos, neg).unwrap();
        let field = DiscreteField::for_rule(&rule, &quad()).unwrap();
        let profile = MassProfile::new(&field, LossWeights::default()).unwrap();
        for q in [0.0, 1e-4, 0.01, PANEL_PREVALENCE, 0.5, 0.9, 1.0] {
            let m = field.masses(&field.labels(&rule.with_kind(RuleKind::Binary { p: q }).unwrap())).unwrap();
            let (pp, np) = profile.positive_masses(q);
            assert!((pp - m.p_p).abs() < 1e-12 && (np - m.n_p).abs() < 1e-12, "q = {q}");
        }
    }

    #[test]
    fn ternary_holdout_is_small_but_present() {
        let (pos, neg) = fixture_pair();
        let rule = ClassificationRule::ternary(0.01, 0.9, pos, neg).unwrap();
        let m = domain_masses(&rule, &quad()).unwrap();
        let p = PANEL_PREVALENCE;
        let mix = |a: f64, b: f64| p * a + (1.0 - p) * b;
        let (hp, pp, nn) = (mix(m.p_h, m.n_h), mix(m.p_p, m.n_p), mix(m.p_n, m.n_n));
        assert!(hp > 0.0 && hp < pp && hp < nn, "holdout {hp}, positive {pp}, negative {nn}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn masses_partition_each_density(p_lo in 0.0f64..1.0, span in 0.0f64..1.0, w_fp in 0.2f64..5.0, w_fn in 0.2f64..5.0) {
                let (pos, neg) = fixture_pair();
                let p_hi = p_lo + span * (1.0 - p_lo);
                let kind = RuleKind::Ternary(PrevalenceInterval::new(p_lo, p_hi).unwrap());
                let rule = ClassificationRule::new(kind, pos, neg, LossWeights { w_fp, w_fn }).unwrap();
                let field = DiscreteField::for_rule(&rule, &quad()).unwrap();
                let m = field.masses(&field.labels(&rule)).unwrap();
                prop_assert!((m.pos_total() - 1.0).abs() < 1e-6);
                prop_assert!((m.neg_total() - 1.0).abs() < 1e-6);
                let lt = m.ternary_loss(PrevalenceInterval { p_lo, p_hi }, LossWeights::default());
                prop_assert!((-1.0..=1.0).contains(&lt));
            }

            #[test]
            fn unit_weights_are_bitwise_neutral(p in 0.0f64..1.0) {
                let (pos, neg) = fixture_pair();
                let rule = ClassificationRule::new(
                    RuleKind::Binary { p }, pos, neg, LossWeights { w_fp: 1.0, w_fn: 1.0 },
                ).unwrap();
                let field = DiscreteField::for_rule(&rule, &quad()).unwrap();
                let m = field.masses(&field.labels(&rule)).unwrap();
                let unweighted = (1.0 - p) * m.n_p + p * m.p_n;
                let report = loss_binary(&rule, &quad()).unwrap();
                prop_assert_eq!(report.total.to_bits(), unweighted.to_bits());
                prop_assert_eq!(report, LossReport::from_masses(&m, p, LossWeights::default(), true));
            }
        }
    }
}
