//! Loss-minimizing classification rules.
//!
//! A binary rule at prevalence `p` calls a point positive when
//! `w_fn p P > w_fp (1 - p) N` and negative otherwise. A ternary rule over
//! `[p_lo, p_hi]` calls it positive when `p_lo P > w_fp (1 - p_lo) N`,
//! negative when `(1 - p_hi) N > w_fn p_hi P`, and holds it out otherwise.
//! Comparisons always use these product forms, so a vanishing `N` needs no
//! special case.

mod baseline;
mod contour;
mod loss;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::density::TruncatedDensity;
use crate::error::{Error, Result};
use crate::geometry::{DomainSpec, LogPoint};

pub use baseline::{three_sigma_rule, ThreeSigmaRule};
pub use contour::{boundary_contour, ContourLevel, Polyline, MIN_CONTOUR_RESOLUTION};
pub use loss::{
    domain_masses, loss_binary, loss_binary_with_labels, loss_ternary, loss_ternary_with_labels, DiscreteField,
    DomainMasses, LossReport, MassProfile,
};

fn check_probability(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {v}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceInterval {
    pub p_lo: f64,
    pub p_hi: f64,
}

impl PrevalenceInterval {
    pub fn new(p_lo: f64, p_hi: f64) -> Result<Self> {
        let i = Self { p_lo, p_hi };
        i.validate()?;
        Ok(i)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("p_lo", self.p_lo)?;
        check_probability("p_hi", self.p_hi)?;
        if self.p_lo > self.p_hi {
            return Err(Error::InvalidParameter(format!(
                "prevalence interval is reversed: p_lo {} > p_hi {}",
                self.p_lo, self.p_hi
            )));
        }
        Ok(())
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.p_lo + self.p_hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RuleKind {
    Binary { p: f64 },
    Ternary(PrevalenceInterval),
}

impl RuleKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            RuleKind::Binary { p } => check_probability("prevalence", *p),
            RuleKind::Ternary(i) => i.validate(),
        }
    }

    /// Prevalence used for the score column: `p` itself, or the interval
    /// midpoint.
    pub fn decision_prevalence(&self) -> f64 {
        match self {
            RuleKind::Binary { p } => *p,
            RuleKind::Ternary(i) => i.midpoint(),
        }
    }
}

/// Relative costs of a false positive and a false negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub w_fp: f64,
    pub w_fn: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { w_fp: 1.0, w_fn: 1.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if self.w_fp.is_finite() && self.w_fp > 0.0 && self.w_fn.is_finite() && self.w_fn > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "loss weights must be finite and > 0, got ({}, {})",
                self.w_fp, self.w_fn
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Positive,
    Negative,
    Holdout,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Positive => "positive",
            Label::Negative => "negative",
            Label::Holdout => "holdout",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A decision rule over a pair of densities on a shared domain. Cloning is
/// cheap; the densities are shared.
#[derive(Debug, Clone)]
pub struct ClassificationRule {
    kind: RuleKind,
    pos: Arc<TruncatedDensity>,
    neg: Arc<TruncatedDensity>,
    weights: LossWeights,
}

impl ClassificationRule {
    pub fn new(
        kind: RuleKind,
        pos: Arc<TruncatedDensity>,
        neg: Arc<TruncatedDensity>,
        weights: LossWeights,
    ) -> Result<Self> {
        kind.validate()?;
        weights.validate()?;
        if pos.domain() != neg.domain() {
            return Err(Error::GridMismatch(format!(
                "positive density lives on [{}, {}]^2 but negative on [{}, {}]^2",
                pos.domain().lo,
                pos.domain().hi,
                neg.domain().lo,
                neg.domain().hi
            )));
        }
        Ok(Self { kind, pos, neg, weights })
    }

    pub fn binary(p: f64, pos: Arc<TruncatedDensity>, neg: Arc<TruncatedDensity>) -> Result<Self> {
        Self::new(RuleKind::Binary { p }, pos, neg, LossWeights::default())
    }

    pub fn ternary(p_lo: f64, p_hi: f64, pos: Arc<TruncatedDensity>, neg: Arc<TruncatedDensity>) -> Result<Self> {
        Self::new(RuleKind::Ternary(PrevalenceInterval::new(p_lo, p_hi)?), pos, neg, LossWeights::default())
    }

    /// Same densities and weights, different prevalence data.
    pub fn with_kind(&self, kind: RuleKind) -> Result<Self> {
        Self::new(kind, self.pos.clone(), self.neg.clone(), self.weights)
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn weights(&self) -> LossWeights {
        self.weights
    }

    pub fn pos(&self) -> &Arc<TruncatedDensity> {
        &self.pos
    }

    pub fn neg(&self) -> &Arc<TruncatedDensity> {
        &self.neg
    }

    pub fn domain(&self) -> DomainSpec {
        self.pos.domain()
    }

    /// Label for density values `pv = P(r)`, `nv = N(r)`.
    ///
    /// Binary ties go negative. Ternary ties go to holdout. With non-unit
    /// weights the two ternary conditions can both hold; the point then goes
    /// to whichever region contributes less loss.
    #[inline]
    pub fn decide(&self, pv: f64, nv: f64) -> Label {
        let LossWeights { w_fp, w_fn } = self.weights;
        match self.kind {
            RuleKind::Binary { p } => {
                if w_fn * p * pv > w_fp * (1.0 - p) * nv {
                    Label::Positive
                } else {
                    Label::Negative
                }
            }
            RuleKind::Ternary(PrevalenceInterval { p_lo, p_hi }) => {
                let pos = p_lo * pv > w_fp * (1.0 - p_lo) * nv;
                let neg = (1.0 - p_hi) * nv > w_fn * p_hi * pv;
                match (pos, neg) {
                    (true, false) => Label::Positive,
                    (false, true) => Label::Negative,
                    (false, false) => Label::Holdout,
                    (true, true) => {
                        let in_pos = w_fp * (1.0 - p_lo) * nv - p_lo * pv;
                        let in_neg = w_fn * p_hi * pv - (1.0 - p_hi) * nv;
                        match in_pos.partial_cmp(&in_neg) {
                            Some(std::cmp::Ordering::Less) => Label::Positive,
                            Some(std::cmp::Ordering::Greater) => Label::Negative,
                            _ => Label::Holdout,
                        }
                    }
                }
            }
        }
    }

    pub fn classify(&self, r: LogPoint) -> Result<Label> {
        self.domain().check(r)?;
        Ok(self.decide(self.pos.density(r), self.neg.density(r)))
    }

    /// `w_fn q P - w_fp (1 - q) N` at the decision prevalence `q`; positive
    /// scores lean positive.
    pub fn score(&self, r: LogPoint) -> Result<f64> {
        self.domain().check(r)?;
        Ok(self.score_values(self.pos.density(r), self.neg.density(r)))
    }

    #[inline]
    pub fn score_values(&self, pv: f64, nv: f64) -> f64 {
        let q = self.kind.decision_prevalence();
        self.weights.w_fn * q * pv - self.weights.w_fp * (1.0 - q) * nv
    }

    /// `P / N`, with `+inf` where `N = 0 < P` and `NaN` where both vanish.
    pub fn likelihood_ratio(&self, r: LogPoint) -> Result<f64> {
        self.domain().check(r)?;
        Ok(likelihood_ratio(self.pos.density(r), self.neg.density(r)))
    }
}

#[inline]
pub fn likelihood_ratio(pv: f64, nv: f64) -> f64 {
    if nv == 0.0 {
        if pv > 0.0 {
            f64::INFINITY
        } else {
            f64::NAN
        }
    } else {
        pv / nv
    }
}

/// On-disk form of a rule: prevalence data, weights and the model files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleDocument {
    #[serde(flatten)]
    pub kind: RuleKind,
    pub weights: LossWeights,
    pub pos_model: std::path::PathBuf,
    pub neg_model: std::path::PathBuf,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{GriddedValues, TruncatedDensity};
    use crate::fixtures;
    use crate::quadrature::QuadratureSpec;

    pub(crate) fn fixture_pair() -> (Arc<TruncatedDensity>, Arc<TruncatedDensity>) {
        let (p, n) = fixtures::densities(&QuadratureSpec::gauss_legendre(128)).unwrap();
        (Arc::new(p), Arc::new(n))
    }

    pub(crate) fn uniform() -> Arc<TruncatedDensity> {
        let g = GriddedValues::new(0.0, 7.0, 8, vec![1.0; 64]).unwrap();
        Arc::new(TruncatedDensity::gridded(g).unwrap())
    }

    #[test]
    fn interval_rejects_reversed_bounds() {
        assert!(PrevalenceInterval::new(0.5, 0.2).is_err());
        assert!(PrevalenceInterval::new(-0.1, 0.2).is_err());
        assert!(PrevalenceInterval::new(0.3, 0.3).is_ok());
    }

    #[test]
    fn mismatched_domains_rejected() {
        let (pos, _) = fixture_pair();
        let other = Arc::new(
            TruncatedDensity::parametric(
                fixtures::negative_model(),
                DomainSpec::new(0.0, 6.0).unwrap(),
                &QuadratureSpec::gauss_legendre(64),
            )
            .unwrap(),
        );
        assert!(matches!(ClassificationRule::binary(0.5, pos, other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn non_positive_weights_rejected() {
        let (pos, neg) = fixture_pair();
        let w = LossWeights { w_fp: 0.0, w_fn: 1.0 };
        assert!(ClassificationRule::new(RuleKind::Binary { p: 0.5 }, pos, neg, w).is_err());
    }

    #[test]
    fn zero_prevalence_labels_everything_negative() {
        let (pos, neg) = fixture_pair();
        let rule = ClassificationRule::binary(0.0, pos, neg).unwrap();
        for i in 0..=20 {
            for j in 0..=20 {
                let r = LogPoint::new(0.35 * i as f64, 0.35 * j as f64);
                assert_eq!(rule.classify(r).unwrap(), Label::Negative);
            }
        }
    }

    #[test]
    fn unit_prevalence_labels_support_positive() {
        let (pos, neg) = fixture_pair();
        let rule = ClassificationRule::binary(1.0, pos.clone(), neg).unwrap();
        for i in 0..=20 {
            for j in 0..=20 {
                let r = LogPoint::new(0.35 * i as f64, 0.35 * j as f64);
                let expected = if pos.density(r) > 0.0 { Label::Positive } else { Label::Negative };
                assert_eq!(rule.classify(r).unwrap(), expected);
            }
        }
    }

    #[test]
    fn collapsed_interval_matches_binary() {
        let (pos, neg) = fixture_pair();
        let bin = ClassificationRule::binary(0.3, pos.clone(), neg.clone()).unwrap();
        let ter = ClassificationRule::ternary(0.3, 0.3, pos, neg).unwrap();
        for i in 0..=70 {
            for j in 0..=70 {
                let r = LogPoint::new(0.1 * i as f64, 0.1 * j as f64);
                let (b, t) = (bin.classify(r).unwrap(), ter.classify(r).unwrap());
                assert!(b == t || t == Label::Holdout, "{r:?}: {b} vs {t}");
            }
        }
    }

    #[test]
    fn ties_follow_the_tie_convention() {
        let u = uniform();
        let bin = ClassificationRule::binary(0.5, u.clone(), u.clone()).unwrap();
        let ter = ClassificationRule::ternary(0.5, 0.5, u.clone(), u).unwrap();
        let r = LogPoint::new(3.0, 3.0);
        assert_eq!(bin.classify(r).unwrap(), Label::Negative);
        assert_eq!(ter.classify(r).unwrap(), Label::Holdout);
    }

    #[test]
    fn outside_point_is_an_error() {
        let (pos, neg) = fixture_pair();
        let rule = ClassificationRule::binary(0.5, pos, neg).unwrap();
        assert!(matches!(rule.classify(LogPoint::new(7.5, 1.0)), Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn likelihood_ratio_infinite_where_negative_vanishes() {
        assert_eq!(likelihood_ratio(2.0, 0.0), f64::INFINITY);
        assert!(likelihood_ratio(0.0, 0.0).is_nan());
        assert_eq!(likelihood_ratio(1.0, 4.0), 0.25);
    }

    #[test]
    fn rule_document_round_trip() {
        let doc = RuleDocument {
            kind: RuleKind::Ternary(PrevalenceInterval { p_lo: 0.01, p_hi: 0.9 }),
            weights: LossWeights::default(),
            pos_model: "pos.json".into(),
            neg_model: "neg.json".into(),
        };
        let s = serde_json::to_string(&doc).unwrap();
        assert!(s.contains("\"kind\":\"ternary\""));
        assert_eq!(serde_json::from_str::<RuleDocument>(&s).unwrap(), doc);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn ternary_regions_nest_inside_binary(
                p_lo in 0.0f64..1.0, span in 0.0f64..1.0, t in 0.0f64..1.0,
                pv in 0.0f64..5.0, nv in 0.0f64..5.0,
            ) {
                let u = uniform();
                let p_hi = p_lo + span * (1.0 - p_lo);
                let p = p_lo + t * (p_hi - p_lo);
                let ter = ClassificationRule::ternary(p_lo, p_hi, u.clone(), u.clone()).unwrap();
                let bin = ClassificationRule::binary(p, u.clone(), u).unwrap();
                let (lt, lb) = (ter.decide(pv, nv), bin.decide(pv, nv));
                if lt == Label::Positive { prop_assert_eq!(lb, Label::Positive); }
                if lt == Label::Negative { prop_assert_eq!(lb, Label::Negative); }
            }
        }
    }
}
