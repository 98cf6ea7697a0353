//! Rule-agnostic prevalence estimation and the adaptive classify/estimate
//! loop.
//!
//! For any positive region `D_P`, the fraction of samples falling in it has
//! expectation `p P_p + (1 - p) N_p`, where `P_p` and `N_p` are the masses of
//! the two densities over `D_P`. Inverting that relation gives an unbiased
//! estimate of `p` whatever rule defines `D_P`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::classifier::{domain_masses, ClassificationRule, DiscreteField, Label, LossWeights, MassProfile, RuleKind};
use crate::density::TruncatedDensity;
use crate::error::{Error, Result};
use crate::geometry::LogPoint;
use crate::quadrature::QuadratureSpec;

/// Smallest `|P_p - N_p|` for which the estimator is defined.
pub const EPSILON_SEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceEstimate {
    pub p_hat: f64,
    /// Fraction of samples inside the positive region.
    pub q_bar_p: f64,
    pub p_p: f64,
    pub n_p: f64,
    /// Whether the raw estimate fell outside `[0, 1]` and was clamped.
    pub clamped: bool,
    pub sample_count: usize,
}

impl PrevalenceEstimate {
    pub fn from_parts(q_bar_p: f64, p_p: f64, n_p: f64, sample_count: usize, epsilon_sep: f64) -> Result<Self> {
        let separation = (p_p - n_p).abs();
        if !(separation > epsilon_sep) {
            return Err(Error::Separation { separation, epsilon: epsilon_sep });
        }
        let raw = (q_bar_p - n_p) / (p_p - n_p);
        let p_hat = raw.clamp(0.0, 1.0);
        Ok(Self { p_hat, q_bar_p, p_p, n_p, clamped: p_hat != raw, sample_count })
    }
}

/// Fraction of `points` the rule labels positive. Holdout points count in
/// the denominator.
pub fn empirical_positive_fraction(points: &[LogPoint], rule: &ClassificationRule) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Precondition("no samples to estimate from".into()));
    }
    let mut inside = 0usize;
    for p in points {
        if rule.classify(*p)? == Label::Positive {
            inside += 1;
        }
    }
    Ok(inside as f64 / points.len() as f64)
}

pub fn estimate_prevalence(
    points: &[LogPoint],
    rule: &ClassificationRule,
    quad: &QuadratureSpec,
) -> Result<PrevalenceEstimate> {
    let q_bar_p = empirical_positive_fraction(points, rule)?;
    let m = domain_masses(rule, quad)?;
    PrevalenceEstimate::from_parts(q_bar_p, m.p_p, m.n_p, points.len(), EPSILON_SEP)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptiveOptions {
    pub p_init: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub epsilon_sep: f64,
    pub quad: QuadratureSpec,
    pub weights: LossWeights,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            p_init: 0.5,
            tol: 1e-4,
            max_iter: 20,
            epsilon_sep: EPSILON_SEP,
            quad: QuadratureSpec::default(),
            weights: LossWeights::default(),
        }
    }
}

impl AdaptiveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_init) {
            return Err(Error::InvalidParameter(format!("p_init must lie in [0, 1], got {}", self.p_init)));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidParameter("adaptive loop needs tol > 0 and max_iter >= 1".into()));
        }
        self.quad.validate()?;
        self.weights.validate()
    }
}

#[derive(Debug, Clone)]
pub struct AdaptiveResult {
    /// One estimate per iteration; the last is the reported prevalence.
    pub estimates: Vec<PrevalenceEstimate>,
    pub final_rule: ClassificationRule,
    pub labels: Vec<(String, Label)>,
    pub converged: bool,
}

impl AdaptiveResult {
    pub fn p_hat(&self) -> f64 {
        self.estimates.last().map_or(f64::NAN, |e| e.p_hat)
    }
}

/// Binary-rule masses at any prevalence for a fixed density pair, plus the
/// iteration itself. Built once and reused across sample sets.
#[derive(Debug, Clone)]
pub struct AdaptiveSolver {
    template: ClassificationRule,
    profile: MassProfile,
    opts: AdaptiveOptions,
}

impl AdaptiveSolver {
    pub fn new(pos: Arc<TruncatedDensity>, neg: Arc<TruncatedDensity>, opts: AdaptiveOptions) -> Result<Self> {
        opts.validate()?;
        let template = ClassificationRule::new(RuleKind::Binary { p: opts.p_init }, pos, neg, opts.weights)?;
        let field = DiscreteField::for_rule(&template, &opts.quad)?;
        let profile = MassProfile::new(&field, opts.weights)?;
        Ok(Self { template, profile, opts })
    }

    pub fn options(&self) -> &AdaptiveOptions {
        &self.opts
    }

    pub fn rule(&self, p: f64) -> Result<ClassificationRule> {
        self.template.with_kind(RuleKind::Binary { p })
    }

    /// `(P, N)` at each point; errors on points outside the domain.
    pub fn point_values(&self, points: &[LogPoint]) -> Result<Vec<(f64, f64)>> {
        let d = self.template.domain();
        points
            .iter()
            .map(|&r| {
                d.check(r)?;
                Ok((self.template.pos().density(r), self.template.neg().density(r)))
            })
            .collect()
    }

    /// The estimate obtained from the binary rule at prevalence `q`.
    pub fn estimate_at(&self, q: f64, values: &[(f64, f64)]) -> Result<PrevalenceEstimate> {
        if values.is_empty() {
            return Err(Error::Precondition("no samples to estimate from".into()));
        }
        let rule = self.rule(q)?;
        let inside = values.iter().filter(|&&(pv, nv)| rule.decide(pv, nv) == Label::Positive).count();
        let (p_p, n_p) = self.profile.positive_masses(q);
        PrevalenceEstimate::from_parts(
            inside as f64 / values.len() as f64,
            p_p,
            n_p,
            values.len(),
            self.opts.epsilon_sep,
        )
    }

    /// Iterates `p_{k+1} = estimate(rule(p_k))` from `p_init`. Returns the
    /// trace and whether the last step moved less than `tol` or clamped onto
    /// 0 or 1.
    pub fn iterate(&self, values: &[(f64, f64)]) -> Result<(Vec<PrevalenceEstimate>, bool)> {
        let mut p = self.opts.p_init;
        let mut trace: Vec<PrevalenceEstimate> = Vec::new();
        for _ in 0..self.opts.max_iter {
            let est = match self.estimate_at(p, values) {
                Ok(e) => e,
                Err(e) => return Err(Error::AdaptiveAborted { completed: trace, source: Box::new(e) }),
            };
            let step = (est.p_hat - p).abs();
            trace.push(est);
            p = est.p_hat;
            // a rule at p = 0 or p = 1 leaves the estimator undefined, so a
            // clamped boundary estimate is a fixed point
            let at_boundary = est.clamped && (p == 0.0 || p == 1.0);
            if step < self.opts.tol || at_boundary {
                return Ok((trace, true));
            }
        }
        Ok((trace, false))
    }
}

/// Classify, estimate, reclassify until the prevalence estimate settles.
///
/// The reported prevalence is always the estimator's value, never the
/// share of samples labeled positive. `max_iter = 1` performs a single
/// update from the `p_init` rule.
pub fn adaptive_classify(
    samples: &[(String, LogPoint)],
    pos: Arc<TruncatedDensity>,
    neg: Arc<TruncatedDensity>,
    opts: &AdaptiveOptions,
) -> Result<AdaptiveResult> {
    let solver = AdaptiveSolver::new(pos, neg, *opts)?;
    let points: Vec<LogPoint> = samples.iter().map(|(_, r)| *r).collect();
    let values = solver.point_values(&points)?;
    let (estimates, converged) = solver.iterate(&values)?;
    let final_rule = solver.rule(estimates.last().expect("at least one iteration").p_hat)?;
    let labels =
        samples.iter().zip(&values).map(|((id, _), &(pv, nv))| (id.clone(), final_rule.decide(pv, nv))).collect();
    Ok(AdaptiveResult { estimates, final_rule, labels, converged })
}
