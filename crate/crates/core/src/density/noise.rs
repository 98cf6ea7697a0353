//! Convolution of a density with an additive measurement-noise kernel.

use rayon::prelude::*;

use super::gridded::GriddedValues;
use super::truncated::{DensityModel, TruncatedDensity};
use crate::error::{Error, Result};
use crate::geometry::DomainSpec;
use crate::quadrature::QuadratureSpec;

/// Noise density sampled on displacements `(a h, b h)` for `a, b` in
/// `-half_width..=half_width`; stored row-major with `a` outer.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseKernel {
    spacing: f64,
    half_width: usize,
    values: Vec<f64>,
}

impl NoiseKernel {
    pub fn new(spacing: f64, half_width: usize, values: Vec<f64>) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidParameter(format!("noise spacing must be > 0, got {spacing}")));
        }
        let side = 2 * half_width + 1;
        if values.len() != side * side {
            return Err(Error::GridMismatch(format!(
                "noise kernel with half width {half_width} needs {} values, got {}",
                side * side,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter("noise values must be finite and non-negative".into()));
        }
        let k = Self { spacing, half_width, values };
        let mass = k.mass();
        if (mass - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidParameter(format!("noise kernel integrates to {mass}, expected 1")));
        }
        Ok(k)
    }

    /// Unit mass concentrated at zero displacement.
    pub fn delta(spacing: f64) -> Result<Self> {
        Self::new(spacing, 0, vec![1.0 / (spacing * spacing)])
    }

    /// Isotropic Gaussian with standard deviation `sigma`, cut at
    /// `cutoff_sigmas` and rescaled to unit discrete mass.
    pub fn gaussian(sigma: f64, spacing: f64, cutoff_sigmas: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("noise sigma must be > 0, got {sigma}")));
        }
        let half_width = (cutoff_sigmas * sigma / spacing).ceil() as usize;
        let side = 2 * half_width + 1;
        let mut values = Vec::with_capacity(side * side);
        for a in 0..side {
            for b in 0..side {
                let dx = (a as f64 - half_width as f64) * spacing;
                let dy = (b as f64 - half_width as f64) * spacing;
                values.push((-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp());
            }
        }
        let raw: f64 = values.iter().sum::<f64>() * spacing * spacing;
        values.iter_mut().for_each(|v| *v /= raw);
        Self::new(spacing, half_width, values)
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// Riemann mass `h^2 * sum(values)`, the quantity convolution preserves.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spacing * self.spacing
    }

    #[inline]
    fn at(&self, a: usize, b: usize) -> f64 {
        self.values[a * (2 * self.half_width + 1) + b]
    }
}

/// Discretized convolution of `density` with `noise`.
///
/// Gridded inputs are used on their own nodes; parametric inputs are sampled
/// on a uniform `quad.nodes_per_axis` grid that includes the domain edges.
/// The noise spacing must equal that grid's spacing. The result lives on the
/// domain enlarged by the kernel's reach and is renormalized there.
pub fn convolve_noise(
    density: &TruncatedDensity,
    noise: &NoiseKernel,
    quad: &QuadratureSpec,
) -> Result<TruncatedDensity> {
    let input = match density.model() {
        DensityModel::Gridded(g) => {
            let norm = density.norm_const();
            GriddedValues::new(g.lo, g.hi, g.n, g.values.iter().map(|v| v * norm).collect())?
        }
        DensityModel::Parametric(_) => {
            quad.validate()?;
            GriddedValues::sample_function(density.domain(), quad.nodes_per_axis, |p| density.density(p))?
        }
    };
    let h = input.spacing();
    if ((h - noise.spacing) / h).abs() > 1e-9 {
        return Err(Error::GridMismatch(format!(
            "density grid spacing {h} differs from noise spacing {}",
            noise.spacing
        )));
    }

    let n = input.n;
    let m = noise.half_width;
    let side = 2 * m + 1;
    let out_n = n + 2 * m;
    let h2 = h * h;
    let rows: Vec<Vec<f64>> = (0..out_n)
        .into_par_iter()
        .map(|oi| {
            (0..out_n)
                .map(|oj| {
                    // output node oi sits at input index oi - m and displacement
                    // index a at offset a - m, so the source row is oi - a
                    let mut acc = 0.0;
                    for a in 0..side {
                        let Some(si) = oi.checked_sub(a).filter(|&v| v < n) else { continue };
                        for b in 0..side {
                            let Some(sj) = oj.checked_sub(b).filter(|&v| v < n) else { continue };
                            acc += input.at(si, sj) * noise.at(a, b);
                        }
                    }
                    acc * h2
                })
                .collect()
        })
        .collect();
    let lo = input.lo - m as f64 * h;
    let hi = input.hi + m as f64 * h;
    let grid = GriddedValues::new(lo, hi, out_n, rows.into_iter().flatten().collect())?;
    let domain = DomainSpec::new(lo, hi)?;
    super::normalize(DensityModel::Gridded(grid), domain, quad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::geometry::LogPoint;

    fn gridded_negative(n: usize) -> TruncatedDensity {
        let quad = QuadratureSpec::gauss_legendre(256);
        let (_, neg) = fixtures::densities(&quad).unwrap();
        let g = GriddedValues::sample_function(neg.domain(), n, |p| neg.density(p)).unwrap();
        TruncatedDensity::gridded(g).unwrap()
    }

    #[test]
    fn delta_noise_is_identity() {
        let d = gridded_negative(96);
        let DensityModel::Gridded(g) = d.model() else { unreachable!() };
        let noise = NoiseKernel::delta(g.spacing()).unwrap();
        let out = convolve_noise(&d, &noise, &QuadratureSpec::trapezoid(96)).unwrap();
        for i in 0..g.n {
            for j in 0..g.n {
                let p = LogPoint::new(g.node(i), g.node(j));
                assert!((out.density(p) - d.density(p)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn spacing_mismatch_rejected() {
        let d = gridded_negative(64);
        let noise = NoiseKernel::delta(0.5).unwrap();
        assert!(matches!(convolve_noise(&d, &noise, &QuadratureSpec::trapezoid(64)), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn kernel_mass_checked() {
        assert!(NoiseKernel::new(0.1, 0, vec![1.0]).is_err());
        let g = NoiseKernel::gaussian(0.1, 0.02, 6.0).unwrap();
        assert!((g.mass() - 1.0).abs() < 1e-12);
    }
}
