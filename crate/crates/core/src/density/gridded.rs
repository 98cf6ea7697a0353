use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DomainSpec, LogPoint};

/// Node values on a uniform grid that includes both domain edges.
///
/// Node `(i, j)` sits at `(lo + i h, lo + j h)` with `h = (hi - lo) / (n - 1)`
/// and is stored at `i * n + j`. Between nodes the field is bilinear.
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedValues {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub values: Vec<f64>,
}

/// Grid metadata as written to the JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub nodes_per_axis: usize,
    pub lo: f64,
    pub hi: f64,
    pub spacing: f64,
    pub values_csv: String,
}

impl GriddedValues {
    pub fn new(lo: f64, hi: f64, n: usize, values: Vec<f64>) -> Result<Self> {
        DomainSpec::new(lo, hi)?;
        if n < 2 {
            return Err(Error::InvalidParameter(format!("gridded density needs at least 2 nodes per axis, got {n}")));
        }
        if values.len() != n * n {
            return Err(Error::GridMismatch(format!(
                "expected {} values for a {n}x{n} grid, got {}",
                n * n,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gridded value {} at node {i} is negative or non-finite",
                values[i]
            )));
        }
        Ok(Self { lo, hi, n, values })
    }

    /// Samples `f` on an `n x n` grid over `domain`.
    pub fn sample_function<F: Fn(LogPoint) -> f64>(domain: DomainSpec, n: usize, f: F) -> Result<Self> {
        let h = domain.width() / (n - 1) as f64;
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(f(LogPoint::new(domain.lo + h * i as f64, domain.lo + h * j as f64)));
            }
        }
        Self::new(domain.lo, domain.hi, n, values)
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn domain(&self) -> DomainSpec {
        DomainSpec { lo: self.lo, hi: self.hi }
    }

    pub fn node(&self, i: usize) -> f64 {
        self.lo + self.spacing() * i as f64
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Bilinear interpolation; zero outside the grid.
    pub fn interpolate(&self, p: LogPoint) -> f64 {
        if p.lx < self.lo || p.lx > self.hi || p.ly < self.lo || p.ly > self.hi {
            return 0.0;
        }
        let h = self.spacing();
        let locate = |v: f64| {
            let t = (v - self.lo) / h;
            let i = (t.floor() as usize).min(self.n - 2);
            (i, t - i as f64)
        };
        let (i, tx) = locate(p.lx);
        let (j, ty) = locate(p.ly);
        let v00 = self.at(i, j);
        let v01 = self.at(i, j + 1);
        let v10 = self.at(i + 1, j);
        let v11 = self.at(i + 1, j + 1);
        (1.0 - tx) * ((1.0 - ty) * v00 + ty * v01) + tx * ((1.0 - ty) * v10 + ty * v11)
    }

    /// Trapezoid weight of node `(i, j)`; exact for the bilinear interpolant.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let h = self.spacing();
        let edge = |k: usize| if k == 0 || k == self.n - 1 { 0.5 } else { 1.0 };
        h * h * edge(i) * edge(j)
    }

    pub fn integral(&self) -> f64 {
        let mut total = 0.0;
        for i in 0..self.n {
            let mut row = 0.0;
            for j in 0..self.n {
                row += self.weight(i, j) * self.at(i, j);
            }
            total += row;
        }
        total
    }

    pub fn meta(&self, values_csv: &str) -> GridMeta {
        GridMeta {
            nodes_per_axis: self.n,
            lo: self.lo,
            hi: self.hi,
            spacing: self.spacing(),
            values_csv: values_csv.to_string(),
        }
    }
}
