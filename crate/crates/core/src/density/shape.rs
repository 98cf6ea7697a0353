//! Unnormalized shapes of the two parametric families.
//!
//! Both are written in the rotated coordinates `z = (lx + ly) / sqrt(2)` and
//! `w = (lx - ly) / sqrt(2)`. The rotation has unit Jacobian, so each shape
//! carries the analytic normalization of its untruncated form; truncation to
//! the domain is handled by [`super::TruncatedDensity`].

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use super::params::{NegativeModelParams, ParametricModel, PositiveModelParams};
use crate::geometry::LogPoint;

/// Gamma-Gaussian value at `p`. Zero for `z < 0`, and at `z = 0` unless `k <= 1`.
pub fn eval_negative_shape(params: &NegativeModelParams, p: LogPoint) -> f64 {
    NegativeKernel::new(params).eval(p)
}

/// Beta-Gaussian value at `p`. Zero outside the open beta support `0 < z < 1`.
pub fn eval_positive_shape(params: &PositiveModelParams, p: LogPoint) -> f64 {
    PositiveKernel::new(params).eval(p)
}

/// Negative shape with its parameter-only terms folded into constants.
#[derive(Debug, Clone, Copy)]
pub struct NegativeKernel {
    params: NegativeModelParams,
    log_const: f64,
    decay: f64,
    inv_two_alpha_sq: f64,
    two_over_beta: f64,
}

impl NegativeKernel {
    pub fn new(params: &NegativeModelParams) -> Self {
        let p = *params;
        let log_const = -0.5 * (2.0 * PI).ln() - p.alpha.ln() - ln_gamma(p.k) - p.k * p.theta.ln();
        Self {
            params: p,
            log_const,
            decay: 1.0 / p.theta + 1.0 / p.beta,
            inv_two_alpha_sq: 0.5 / (p.alpha * p.alpha),
            two_over_beta: 2.0 / p.beta,
        }
    }

    #[inline]
    pub fn eval(&self, p: LogPoint) -> f64 {
        let z = p.diagonal();
        let w = p.cross();
        let k = self.params.k;
        if z < 0.0 {
            return 0.0;
        }
        let dw = w - self.params.mu;
        let gauss = -dw * dw * self.inv_two_alpha_sq * (-self.two_over_beta * z).exp();
        if z == 0.0 {
            return if k > 1.0 {
                0.0
            } else if k == 1.0 {
                (self.log_const + gauss).exp()
            } else {
                f64::INFINITY
            };
        }
        ((k - 1.0) * z.ln() - self.decay * z + gauss + self.log_const).exp()
    }
}

/// Positive shape with its parameter-only terms folded into constants.
#[derive(Debug, Clone, Copy)]
pub struct PositiveKernel {
    params: PositiveModelParams,
    log_const: f64,
    inv_two_theta_sq: f64,
    inv_scale: f64,
}

impl PositiveKernel {
    pub fn new(params: &PositiveModelParams) -> Self {
        let p = *params;
        let log_const = ln_gamma(p.alpha + p.beta_shape)
            - ln_gamma(p.alpha)
            - ln_gamma(p.beta_shape)
            - p.theta.ln()
            - 0.5 * (2.0 * PI).ln();
        Self { params: p, log_const, inv_two_theta_sq: 0.5 / (p.theta * p.theta), inv_scale: 1.0 / p.z_scale }
    }

    #[inline]
    pub fn eval(&self, p: LogPoint) -> f64 {
        let z = p.diagonal() * self.inv_scale;
        if !(z > 0.0 && z < 1.0) {
            return 0.0;
        }
        let dw = p.cross() - self.params.mu;
        let a = self.params.alpha;
        let b = self.params.beta_shape;
        ((a - 1.5) * z.ln() + (b - 1.0) * (-z).ln_1p() - dw * dw * self.inv_two_theta_sq / z + self.log_const).exp()
    }
}

/// Either kernel behind one call site.
#[derive(Debug, Clone, Copy)]
pub enum ShapeKernel {
    Negative(NegativeKernel),
    Positive(PositiveKernel),
}

impl ShapeKernel {
    pub fn new(model: &ParametricModel) -> Self {
        match model {
            ParametricModel::Negative(p) => Self::Negative(NegativeKernel::new(p)),
            ParametricModel::Positive(p) => Self::Positive(PositiveKernel::new(p)),
        }
    }

    #[inline]
    pub fn eval(&self, p: LogPoint) -> f64 {
        match self {
            Self::Negative(k) => k.eval(p),
            Self::Positive(k) => k.eval(p),
        }
    }
}
