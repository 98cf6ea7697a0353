//! Points in the transformed log-measurement plane and the rectangular
//! domains densities are truncated to.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point `(lx, ly)` in log-measurement space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogPoint {
    pub lx: f64,
    pub ly: f64,
}

impl LogPoint {
    pub const fn new(lx: f64, ly: f64) -> Self {
        Self { lx, ly }
    }

    /// Diagonal coordinate `(lx + ly) / sqrt(2)`.
    #[inline]
    pub fn diagonal(&self) -> f64 {
        (self.lx + self.ly) * FRAC_1_SQRT_2
    }

    /// Anti-diagonal coordinate `(lx - ly) / sqrt(2)`.
    #[inline]
    pub fn cross(&self) -> f64 {
        (self.lx - self.ly) * FRAC_1_SQRT_2
    }

    /// Inverse of the rotation: build a point from diagonal `u` and cross `w`.
    #[inline]
    pub fn from_rotated(u: f64, w: f64) -> Self {
        Self { lx: (u + w) * FRAC_1_SQRT_2, ly: (u - w) * FRAC_1_SQRT_2 }
    }

    pub fn is_finite(&self) -> bool {
        self.lx.is_finite() && self.ly.is_finite()
    }
}

/// The square `[lo, hi]^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub lo: f64,
    pub hi: f64,
}

impl Default for DomainSpec {
    fn default() -> Self {
        Self { lo: 0.0, hi: 7.0 }
    }
}

impl DomainSpec {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        let d = Self { lo, hi };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::InvalidParameter(format!(
                "domain requires finite lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn area(&self) -> f64 {
        self.width() * self.width()
    }

    #[inline]
    pub fn contains(&self, p: LogPoint) -> bool {
        p.lx >= self.lo && p.lx <= self.hi && p.ly >= self.lo && p.ly <= self.hi
    }

    pub fn check(&self, p: LogPoint) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::OutsideDomain { x: p.lx, y: p.ly, lo: self.lo, hi: self.hi })
        }
    }
}
