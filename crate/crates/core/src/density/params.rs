use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the hybrid gamma-Gaussian family used for negative samples.
///
/// Along the diagonal `z` the density is gamma with shape `k` and scale
/// `theta`; across it `w` is Gaussian around `mu` with a width `alpha`
/// that grows as `exp(z / beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NegativeModelParams {
    pub theta: f64,
    pub k: f64,
    pub alpha: f64,
    pub mu: f64,
    pub beta: f64,
}

impl NegativeModelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [("theta", self.theta), ("k", self.k), ("alpha", self.alpha), ("beta", self.beta)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("negative model: {name} must be finite and > 0, got {v}")));
            }
        }
        if !self.mu.is_finite() {
            return Err(Error::InvalidParameter(format!("negative model: mu must be finite, got {}", self.mu)));
        }
        Ok(())
    }
}

/// Parameters of the hybrid beta-Gaussian family used for positive samples.
///
/// The diagonal coordinate is rescaled by `z_scale * sqrt(2)` onto the beta
/// support; the cross coordinate is Gaussian with width `theta * sqrt(z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositiveModelParams {
    pub alpha: f64,
    pub beta_shape: f64,
    pub theta: f64,
    pub mu: f64,
    #[serde(default = "default_z_scale")]
    pub z_scale: f64,
}

fn default_z_scale() -> f64 {
    PositiveModelParams::DEFAULT_Z_SCALE
}

impl PositiveModelParams {
    pub const DEFAULT_Z_SCALE: f64 = 9.0;

    pub fn validate(&self) -> Result<()> {
        let positive =
            [("alpha", self.alpha), ("beta_shape", self.beta_shape), ("theta", self.theta), ("z_scale", self.z_scale)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("positive model: {name} must be finite and > 0, got {v}")));
            }
        }
        if !self.mu.is_finite() {
            return Err(Error::InvalidParameter(format!("positive model: mu must be finite, got {}", self.mu)));
        }
        Ok(())
    }
}

/// Which parametric family a fit or a model file refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Negative,
    Positive,
    Gridded,
}

impl std::str::FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "negative" => Ok(Self::Negative),
            "positive" => Ok(Self::Positive),
            "gridded" => Ok(Self::Gridded),
            other => Err(Error::Config(format!("unknown model family `{other}`"))),
        }
    }
}

impl std::fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Negative => "negative",
            Self::Positive => "positive",
            Self::Gridded => "gridded",
        })
    }
}

/// Parameters of either parametric family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParametricModel {
    Negative(NegativeModelParams),
    Positive(PositiveModelParams),
}

impl ParametricModel {
    pub fn family(&self) -> ModelFamily {
        match self {
            Self::Negative(_) => ModelFamily::Negative,
            Self::Positive(_) => ModelFamily::Positive,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Negative(p) => p.validate(),
            Self::Positive(p) => p.validate(),
        }
    }
}
