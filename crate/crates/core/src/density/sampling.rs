//! Seeded sampling from truncated densities.
//!
//! Parametric families are drawn exactly in rotated coordinates (the
//! diagonal marginal is gamma or beta, the cross coordinate is conditionally
//! Gaussian) and then rejected against the truncation square.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma};

use super::gridded::GriddedValues;
use super::params::ParametricModel;
use super::truncated::{DensityModel, TruncatedDensity};
use crate::error::{Error, Result};
use crate::geometry::{DomainSpec, LogPoint};

/// Acceptance rates below this signal a misconfigured model or domain.
pub const ACCEPTANCE_FLOOR: f64 = 1e-3;
const MIN_ATTEMPTS_FOR_RATE: u64 = 1_000;

/// Draws `n` points from `density`; identical seeds give identical output.
pub fn sample(density: &TruncatedDensity, n: usize, seed: u64) -> Result<Vec<LogPoint>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampler = Sampler::new(density)?;
    let mut out = Vec::with_capacity(n);
    sampler.fill(&mut rng, n, &mut out)?;
    Ok(out)
}

/// Reusable sampler for one density; draws from any caller-supplied RNG.
#[derive(Debug)]
pub struct Sampler<'a> {
    source: Source<'a>,
    domain: DomainSpec,
    attempts: u64,
    accepted: u64,
}

#[derive(Debug)]
enum Source<'a> {
    Negative { diag: Gamma<f64>, mu: f64, alpha: f64, beta: f64 },
    Positive { diag: Beta<f64>, mu: f64, theta: f64, z_scale: f64 },
    Gridded { grid: &'a GriddedValues, cumulative: Vec<f64> },
}

fn distr_err(e: impl std::fmt::Display) -> Error {
    Error::InvalidParameter(e.to_string())
}

impl<'a> Sampler<'a> {
    pub fn new(density: &'a TruncatedDensity) -> Result<Self> {
        let source = match density.model() {
            DensityModel::Parametric(ParametricModel::Negative(p)) => Source::Negative {
                diag: Gamma::new(p.k, p.theta).map_err(distr_err)?,
                mu: p.mu,
                alpha: p.alpha,
                beta: p.beta,
            },
            DensityModel::Parametric(ParametricModel::Positive(p)) => Source::Positive {
                diag: Beta::new(p.alpha, p.beta_shape).map_err(distr_err)?,
                mu: p.mu,
                theta: p.theta,
                z_scale: p.z_scale,
            },
            DensityModel::Gridded(grid) => {
                let cells = grid.n - 1;
                let mut cumulative = Vec::with_capacity(cells * cells);
                let mut acc = 0.0;
                for i in 0..cells {
                    for j in 0..cells {
                        acc += grid.at(i, j) + grid.at(i + 1, j) + grid.at(i, j + 1) + grid.at(i + 1, j + 1);
                        cumulative.push(acc);
                    }
                }
                if !(acc > 0.0) {
                    return Err(Error::ZeroMass);
                }
                Source::Gridded { grid, cumulative }
            }
        };
        Ok(Self { source, domain: density.domain(), attempts: 0, accepted: 0 })
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.attempts == 0 {
            1.0
        } else {
            self.accepted as f64 / self.attempts as f64
        }
    }

    /// Appends `n` accepted points to `out`.
    pub fn fill<R: Rng + ?Sized>(&mut self, rng: &mut R, n: usize, out: &mut Vec<LogPoint>) -> Result<()> {
        let target = out.len() + n;
        while out.len() < target {
            let p = self.propose(rng);
            self.attempts += 1;
            if self.domain.contains(p) {
                self.accepted += 1;
                out.push(p);
            } else if self.attempts >= MIN_ATTEMPTS_FOR_RATE && self.acceptance_rate() < ACCEPTANCE_FLOOR {
                return Err(Error::LowAcceptance { rate: self.acceptance_rate(), floor: ACCEPTANCE_FLOOR });
            }
        }
        Ok(())
    }

    pub fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<LogPoint> {
        let mut out = Vec::with_capacity(1);
        self.fill(rng, 1, &mut out)?;
        Ok(out[0])
    }

    fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> LogPoint {
        match &self.source {
            Source::Negative { diag, mu, alpha, beta } => {
                let z = diag.sample(rng);
                let sd = alpha * (z / beta).exp();
                let w = mu + sd * standard_normal(rng);
                LogPoint::from_rotated(z, w)
            }
            Source::Positive { diag, mu, theta, z_scale } => {
                let z = diag.sample(rng);
                if !(z > 0.0 && z < 1.0) {
                    // outside the open support; force a rejection
                    return LogPoint::new(f64::NAN, f64::NAN);
                }
                let w = mu + theta * z.sqrt() * standard_normal(rng);
                LogPoint::from_rotated(z_scale * z, w)
            }
            Source::Gridded { grid, cumulative } => {
                let total = *cumulative.last().expect("non-empty grid");
                let u = rng.random::<f64>() * total;
                let cell = cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1);
                let cells = grid.n - 1;
                let (i, j) = (cell / cells, cell % cells);
                let corners = [grid.at(i, j), grid.at(i, j + 1), grid.at(i + 1, j), grid.at(i + 1, j + 1)];
                let cap = corners.iter().cloned().fold(0.0, f64::max);
                let h = grid.spacing();
                loop {
                    let tx: f64 = rng.random();
                    let ty: f64 = rng.random();
                    let v = (1.0 - tx) * ((1.0 - ty) * corners[0] + ty * corners[1])
                        + tx * ((1.0 - ty) * corners[2] + ty * corners[3]);
                    if rng.random::<f64>() * cap <= v {
                        return LogPoint::new(grid.node(i) + tx * h, grid.node(j) + ty * h);
                    }
                }
            }
        }
    }
}

#[inline]
fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rand_distr::StandardNormal.sample(rng)
}
