//! Tensor-product quadrature on square domains.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DomainSpec, LogPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureScheme {
    TensorTrapezoid,
    TensorGaussLegendre,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSpec {
    pub nodes_per_axis: usize,
    pub scheme: QuadratureScheme,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { nodes_per_axis: 512, scheme: QuadratureScheme::TensorGaussLegendre }
    }
}

impl QuadratureSpec {
    pub const MIN_NODES: usize = 16;

    pub fn gauss_legendre(nodes_per_axis: usize) -> Self {
        Self { nodes_per_axis, scheme: QuadratureScheme::TensorGaussLegendre }
    }

    pub fn trapezoid(nodes_per_axis: usize) -> Self {
        Self { nodes_per_axis, scheme: QuadratureScheme::TensorTrapezoid }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes_per_axis < Self::MIN_NODES {
            return Err(Error::InvalidParameter(format!(
                "quadrature needs at least {} nodes per axis, got {}",
                Self::MIN_NODES,
                self.nodes_per_axis
            )));
        }
        Ok(())
    }

    /// The coarser companion rule used for convergence checks.
    pub fn halved(&self) -> Self {
        Self { nodes_per_axis: (self.nodes_per_axis / 2).max(2), scheme: self.scheme }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, ascending.
///
/// Newton iteration on the three-term recurrence, seeded with the
/// Tricomi approximation of each root.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// One-dimensional rule mapped onto an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl AxisRule {
    pub fn new(spec: &QuadratureSpec, lo: f64, hi: f64) -> Self {
        let n = spec.nodes_per_axis;
        match spec.scheme {
            QuadratureScheme::TensorGaussLegendre => {
                let (t, w) = gauss_legendre(n);
                let half = 0.5 * (hi - lo);
                let mid = 0.5 * (hi + lo);
                Self {
                    nodes: t.iter().map(|&t| mid + half * t).collect(),
                    weights: w.iter().map(|&w| half * w).collect(),
                }
            }
            QuadratureScheme::TensorTrapezoid => {
                let n = n.max(2);
                let h = (hi - lo) / (n - 1) as f64;
                let nodes = (0..n).map(|i| lo + h * i as f64).collect();
                let weights = (0..n).map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h }).collect();
                Self { nodes, weights }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Tensor grid over `[lo, hi]^2`. Node `(i, j)` sits at `(x_i, y_j)` and is
/// stored at flat index `i * n + j` (row-major, x outer).
#[derive(Debug, Clone, PartialEq)]
pub struct TensorGrid {
    pub axis: AxisRule,
    pub domain: DomainSpec,
    pub spec: QuadratureSpec,
}

impl TensorGrid {
    pub fn new(spec: &QuadratureSpec, domain: DomainSpec) -> Result<Self> {
        spec.validate()?;
        domain.validate()?;
        Ok(Self { axis: AxisRule::new(spec, domain.lo, domain.hi), domain, spec: *spec })
    }

    pub fn n(&self) -> usize {
        self.axis.len()
    }

    pub fn len(&self) -> usize {
        self.n() * self.n()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn point(&self, idx: usize) -> LogPoint {
        let n = self.n();
        LogPoint::new(self.axis.nodes[idx / n], self.axis.nodes[idx % n])
    }

    #[inline]
    pub fn weight(&self, idx: usize) -> f64 {
        let n = self.n();
        self.axis.weights[idx / n] * self.axis.weights[idx % n]
    }

    /// Evaluates `f` at every node, rows in parallel, row-major output.
    pub fn evaluate<F>(&self, f: F) -> Vec<f64>
    where
        F: Fn(LogPoint) -> f64 + Sync,
    {
        let n = self.n();
        let xs = &self.axis.nodes;
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| xs.iter().map(|&y| f(LogPoint::new(xs[i], y))).collect::<Vec<_>>())
            .collect();
        rows.into_iter().flatten().collect()
    }

    /// Weighted sum of precomputed node values. Rows are reduced first, then
    /// accumulated in row order, so the result does not depend on threading.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        let n = self.n();
        debug_assert_eq!(values.len(), n * n);
        let w = &self.axis.weights;
        let row_sums: Vec<f64> =
            values.par_chunks(n).map(|row| row.iter().zip(w).map(|(v, wy)| v * wy).sum::<f64>()).collect();
        row_sums.iter().zip(w).map(|(s, wx)| s * wx).sum()
    }

    pub fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn(LogPoint) -> f64 + Sync,
    {
        self.integrate_values(&self.evaluate(f))
    }
}
