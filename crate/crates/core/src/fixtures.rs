//! Reference parameter sets used by the test suites, the validation harness
//! and the CLI defaults.
//!
//! The values mimic the layout of two-channel serology data in log space:
//! negatives cluster near the origin with a cross-diagonal spread that widens
//! away from it, positives spread along the diagonal far from the origin.

use crate::density::{NegativeModelParams, ParametricModel, PositiveModelParams, TruncatedDensity};
use crate::error::Result;
use crate::geometry::DomainSpec;
use crate::quadrature::QuadratureSpec;

/// Prevalence of the reference serology panel (58 positives out of 401).
pub const PANEL_PREVALENCE: f64 = 58.0 / 401.0;

pub const NEGATIVE: NegativeModelParams = NegativeModelParams { theta: 0.12, k: 12.0, alpha: 0.15, mu: 0.1, beta: 2.0 };

pub const POSITIVE: PositiveModelParams =
    PositiveModelParams { alpha: 10.0, beta_shape: 3.0, theta: 0.4, mu: -0.15, z_scale: 9.0 };

pub fn negative_model() -> ParametricModel {
    ParametricModel::Negative(NEGATIVE)
}

pub fn positive_model() -> ParametricModel {
    ParametricModel::Positive(POSITIVE)
}

/// `(positive, negative)` fixture densities on the default domain.
pub fn densities(quad: &QuadratureSpec) -> Result<(TruncatedDensity, TruncatedDensity)> {
    let domain = DomainSpec::default();
    Ok((
        TruncatedDensity::parametric(positive_model(), domain, quad)?,
        TruncatedDensity::parametric(negative_model(), domain, quad)?,
    ))
}
