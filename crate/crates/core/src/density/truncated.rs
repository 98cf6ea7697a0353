use serde::{Deserialize, Serialize};

use super::gridded::GriddedValues;
use super::params::{ModelFamily, ParametricModel};
use super::shape::ShapeKernel;
use crate::error::{Error, Result};
use crate::geometry::{DomainSpec, LogPoint};
use crate::quadrature::{QuadratureSpec, TensorGrid};

/// Relative change of the normalization between the requested rule and the
/// half-resolution rule below which a normalization counts as converged.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// What a [`TruncatedDensity`] is built from.
#[derive(Debug, Clone)]
pub enum DensityModel {
    Parametric(ParametricModel),
    Gridded(GriddedValues),
}

impl DensityModel {
    pub fn family(&self) -> ModelFamily {
        match self {
            Self::Parametric(p) => p.family(),
            Self::Gridded(_) => ModelFamily::Gridded,
        }
    }
}

/// Convergence record of a normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationCheck {
    pub nodes_per_axis: usize,
    pub mass: f64,
    pub coarse_nodes_per_axis: usize,
    pub coarse_mass: f64,
    pub relative_delta: f64,
    pub converged: bool,
}

/// A density restricted to a square domain and rescaled to unit mass there.
#[derive(Debug, Clone)]
pub struct TruncatedDensity {
    model: DensityModel,
    kernel: Option<ShapeKernel>,
    domain: DomainSpec,
    norm_const: f64,
    check: NormalizationCheck,
}

/// Normalizes `model` over `domain`.
///
/// Parametric shapes are integrated with `quad` and with the half-resolution
/// rule; both masses are kept in the returned [`NormalizationCheck`].
/// Gridded models use their own trapezoid weights, which integrate the
/// bilinear interpolant exactly, and must cover exactly `domain`.
pub fn normalize(model: DensityModel, domain: DomainSpec, quad: &QuadratureSpec) -> Result<TruncatedDensity> {
    domain.validate()?;
    match model {
        DensityModel::Parametric(params) => {
            params.validate()?;
            let kernel = ShapeKernel::new(&params);
            let mass = shape_mass(&kernel, domain, quad)?;
            let coarse_spec = quad.halved();
            let coarse_mass = shape_mass(&kernel, domain, &coarse_spec)?;
            let relative_delta = ((mass - coarse_mass) / mass).abs();
            Ok(TruncatedDensity {
                model: DensityModel::Parametric(params),
                kernel: Some(kernel),
                domain,
                norm_const: 1.0 / mass,
                check: NormalizationCheck {
                    nodes_per_axis: quad.nodes_per_axis,
                    mass,
                    coarse_nodes_per_axis: coarse_spec.nodes_per_axis,
                    coarse_mass,
                    relative_delta,
                    converged: relative_delta < NORMALIZATION_TOLERANCE,
                },
            })
        }
        DensityModel::Gridded(grid) => {
            if grid.domain() != domain {
                return Err(Error::GridMismatch(format!(
                    "grid covers [{}, {}] but the domain is [{}, {}]",
                    grid.lo, grid.hi, domain.lo, domain.hi
                )));
            }
            let mass = grid.integral();
            if !(mass > 0.0) {
                return Err(Error::ZeroMass);
            }
            Ok(TruncatedDensity {
                check: NormalizationCheck {
                    nodes_per_axis: grid.n,
                    mass,
                    coarse_nodes_per_axis: grid.n,
                    coarse_mass: mass,
                    relative_delta: 0.0,
                    converged: true,
                },
                model: DensityModel::Gridded(grid),
                kernel: None,
                domain,
                norm_const: 1.0 / mass,
            })
        }
    }
}

fn shape_mass(kernel: &ShapeKernel, domain: DomainSpec, quad: &QuadratureSpec) -> Result<f64> {
    let grid = TensorGrid::new(quad, domain)?;
    let values = grid.evaluate(|p| kernel.eval(p));
    if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
        let p = grid.point(idx);
        return Err(Error::NonFinite { x: p.lx, y: p.ly });
    }
    let mass = grid.integrate_values(&values);
    if !(mass > 0.0) {
        return Err(Error::ZeroMass);
    }
    Ok(mass)
}

impl TruncatedDensity {
    /// Convenience: normalize a parametric model.
    pub fn parametric(model: ParametricModel, domain: DomainSpec, quad: &QuadratureSpec) -> Result<Self> {
        normalize(DensityModel::Parametric(model), domain, quad)
    }

    pub fn gridded(grid: GriddedValues) -> Result<Self> {
        let domain = grid.domain();
        normalize(DensityModel::Gridded(grid), domain, &QuadratureSpec::default())
    }

    /// Rebuilds a density from stored parts without re-integrating.
    pub fn from_parts(
        model: DensityModel,
        domain: DomainSpec,
        norm_const: f64,
        check: NormalizationCheck,
    ) -> Result<Self> {
        domain.validate()?;
        if !(norm_const.is_finite() && norm_const > 0.0) {
            return Err(Error::InvalidParameter(format!("norm_const must be > 0, got {norm_const}")));
        }
        let kernel = match &model {
            DensityModel::Parametric(p) => {
                p.validate()?;
                Some(ShapeKernel::new(p))
            }
            DensityModel::Gridded(g) => {
                if g.domain() != domain {
                    return Err(Error::GridMismatch("grid extent differs from domain".into()));
                }
                None
            }
        };
        Ok(Self { model, kernel, domain, norm_const, check })
    }

    pub fn model(&self) -> &DensityModel {
        &self.model
    }

    pub fn family(&self) -> ModelFamily {
        self.model.family()
    }

    pub fn domain(&self) -> DomainSpec {
        self.domain
    }

    pub fn norm_const(&self) -> f64 {
        self.norm_const
    }

    pub fn normalization(&self) -> &NormalizationCheck {
        &self.check
    }

    /// The unnormalized shape, ignoring truncation.
    #[inline]
    pub fn shape(&self, p: LogPoint) -> f64 {
        match (&self.kernel, &self.model) {
            (Some(k), _) => k.eval(p),
            (None, DensityModel::Gridded(g)) => g.interpolate(p),
            (None, DensityModel::Parametric(_)) => unreachable!("parametric density without kernel"),
        }
    }

    /// Normalized density; zero outside the domain.
    #[inline]
    pub fn density(&self, p: LogPoint) -> f64 {
        if self.domain.contains(p) {
            self.norm_const * self.shape(p)
        } else {
            0.0
        }
    }

    /// Density expressed per unit of the original (exponentiated) measurement:
    /// `density(ln x, ln y) / (x y)`.
    pub fn to_linear_units(&self, x: f64, y: f64) -> Result<f64> {
        if !(x > 0.0 && y > 0.0) {
            return Err(Error::InvalidParameter(format!("linear-unit coordinates must be positive, got ({x}, {y})")));
        }
        Ok(self.density(LogPoint::new(x.ln(), y.ln())) / (x * y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::params::NegativeModelParams;
    use crate::fixtures;

    #[test]
    fn uniform_grid_normalizes_to_inverse_area() {
        let g = GriddedValues::sample_function(DomainSpec::default(), 8, |_| 1.0).unwrap();
        let d = TruncatedDensity::gridded(g).unwrap();
        assert!((d.norm_const() - 1.0 / 49.0).abs() < 1e-15);
        assert!((d.density(LogPoint::new(3.3, 1.1)) - 1.0 / 49.0).abs() < 1e-15);
    }

    #[test]
    fn negative_family_integrates_to_one() {
        let quad = QuadratureSpec::default();
        let d = TruncatedDensity::parametric(fixtures::negative_model(), DomainSpec::default(), &quad).unwrap();
        let grid = TensorGrid::new(&quad, d.domain()).unwrap();
        let total = grid.integrate(|p| d.density(p));
        assert!((total - 1.0).abs() < 1e-6);
        assert!(d.normalization().converged);
    }

    #[test]
    fn shrinking_domain_raises_norm_const() {
        let quad = QuadratureSpec::default();
        let model = fixtures::negative_model();
        let full = TruncatedDensity::parametric(model, DomainSpec::default(), &quad).unwrap();
        let half = TruncatedDensity::parametric(model, DomainSpec::new(0.0, 3.5).unwrap(), &quad).unwrap();
        assert!(half.norm_const() > full.norm_const());
    }

    #[test]
    fn zero_mass_is_an_error() {
        let model =
            ParametricModel::Negative(NegativeModelParams { theta: 0.5, k: 2.0, alpha: 0.2, mu: 0.0, beta: 3.0 });
        // the shape vanishes for z < 0, i.e. everywhere on this domain
        let res = TruncatedDensity::parametric(
            model,
            DomainSpec::new(-10.0, -5.0).unwrap(),
            &QuadratureSpec::gauss_legendre(32),
        );
        assert!(matches!(res, Err(Error::ZeroMass)));
    }

    #[test]
    fn linear_units_at_unit_point_match_log_origin() {
        let g = GriddedValues::sample_function(DomainSpec::default(), 16, |p| 1.0 + p.lx).unwrap();
        let d = TruncatedDensity::gridded(g).unwrap();
        assert_eq!(d.to_linear_units(1.0, 1.0).unwrap(), d.density(LogPoint::new(0.0, 0.0)));
        assert_eq!(d.to_linear_units(7f64.exp() * 1.01, 2.0).unwrap(), 0.0);
        assert!(d.to_linear_units(0.0, 2.0).is_err());
    }
}
