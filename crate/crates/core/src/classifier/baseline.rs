//! Per-axis mean plus three standard deviations of the negatives.

use serde::{Deserialize, Serialize};

use super::Label;
use crate::error::{Error, Result};
use crate::geometry::LogPoint;

/// Axis-aligned thresholds; a point is positive when either coordinate
/// exceeds its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeSigmaRule {
    pub t_x: f64,
    pub t_y: f64,
}

impl ThreeSigmaRule {
    pub fn classify(&self, r: LogPoint) -> Label {
        if r.lx > self.t_x || r.ly > self.t_y {
            Label::Positive
        } else {
            Label::Negative
        }
    }
}

/// Thresholds from the sample mean and sample standard deviation (`n - 1`
/// denominator) of each coordinate.
pub fn three_sigma_rule(neg_points: &[LogPoint]) -> Result<ThreeSigmaRule> {
    if neg_points.len() < 2 {
        return Err(Error::Precondition(format!(
            "three-sigma rule needs at least 2 negative points, got {}",
            neg_points.len()
        )));
    }
    let n = neg_points.len() as f64;
    let threshold = |f: fn(&LogPoint) -> f64| {
        let mean = neg_points.iter().map(f).sum::<f64>() / n;
        let var = neg_points.iter().map(|p| (f(p) - mean).powi(2)).sum::<f64>() / (n - 1.0);
        mean + 3.0 * var.sqrt()
    };
    Ok(ThreeSigmaRule { t_x: threshold(|p| p.lx), t_y: threshold(|p| p.ly) })
}
