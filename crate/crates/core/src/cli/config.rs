//! Fully resolved per-command configurations. Each is what a manifest
//! records and what a replay runs from.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::{LossWeights, PrevalenceInterval, RuleKind};
use crate::density::{FitOptions, ModelFamily, PositiveModelParams};
use crate::error::{Error, Result};
use crate::geometry::DomainSpec;
use crate::harness::ExperimentConfig;
use crate::ingest::{ColumnMapping, PreprocessConfig, SampleLabel};
use crate::prevalence::AdaptiveOptions;
use crate::quadrature::QuadratureSpec;

/// Where samples come from and how they reach log space.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub input: PathBuf,
    pub columns: ColumnMapping,
    pub preprocess: PreprocessConfig,
    /// The mapped channel columns already hold log-space coordinates; skip
    /// preprocessing.
    pub log_space: bool,
}

impl InputConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input.as_os_str().is_empty() {
            return Err(Error::Config("no input CSV given".into()));
        }
        self.preprocess.validate()
    }
}

/// Model files; absent paths fall back to the built-in reference densities
/// where a command allows it.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelPaths {
    pub pos_model: Option<PathBuf>,
    pub neg_model: Option<PathBuf>,
}

impl ModelPaths {
    pub fn require(&self) -> Result<()> {
        if self.pos_model.is_none() || self.neg_model.is_none() {
            return Err(Error::Config("both --pos-model and --neg-model are required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub data: InputConfig,
    pub family: ModelFamily,
    /// Records used for the fit; defaults to the label matching `family`.
    pub label: Option<SampleLabel>,
    pub domain: DomainSpec,
    pub quad: QuadratureSpec,
    pub fit: FitOptions,
    pub z_scale: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            data: InputConfig::default(),
            family: ModelFamily::Negative,
            label: None,
            domain: DomainSpec::default(),
            quad: QuadratureSpec::default(),
            fit: FitOptions::default(),
            z_scale: PositiveModelParams::DEFAULT_Z_SCALE,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        if self.family == ModelFamily::Gridded {
            return Err(Error::Config("only the negative and positive families can be fitted".into()));
        }
        self.domain.validate()?;
        self.quad.validate()
    }

    pub fn fit_label(&self) -> SampleLabel {
        self.label.unwrap_or(match self.family {
            ModelFamily::Positive => SampleLabel::Positive,
            _ => SampleLabel::Negative,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    pub data: InputConfig,
    pub models: ModelPaths,
    pub rule: RuleKind,
    pub weights: LossWeights,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            data: InputConfig::default(),
            models: ModelPaths::default(),
            rule: RuleKind::Binary { p: 0.5 },
            weights: LossWeights::default(),
        }
    }
}

impl ClassifyConfig {
    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        self.models.require()?;
        self.rule.validate()?;
        self.weights.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub data: InputConfig,
    pub models: ModelPaths,
    pub adaptive: AdaptiveOptions,
}

impl EstimateConfig {
    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        self.models.require()?;
        self.adaptive.validate()
    }
}

/// Synthetic sample export instead of a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitConfig {
    pub count: usize,
    pub prevalence: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub models: ModelPaths,
    pub experiment: ExperimentConfig,
    pub known_prevalence: bool,
    pub emit: Option<EmitConfig>,
}

impl SimulateConfig {
    pub fn validate(&self) -> Result<()> {
        match self.emit {
            Some(e) if !(0.0..=1.0).contains(&e.prevalence) => {
                Err(Error::Config(format!("emit prevalence must lie in [0, 1], got {}", e.prevalence)))
            }
            Some(_) => Ok(()),
            None => self.experiment.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub models: ModelPaths,
    pub true_p: f64,
    pub q_grid: Vec<f64>,
    pub quad: QuadratureSpec,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            models: ModelPaths::default(),
            true_p: 0.1,
            q_grid: crate::harness::default_q_grid(),
            quad: QuadratureSpec::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.quad.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContourConfig {
    pub models: ModelPaths,
    /// One binary boundary family per prevalence.
    pub prevalences: Vec<f64>,
    /// Optional ternary rule traced alongside.
    pub interval: Option<PrevalenceInterval>,
    pub resolution: usize,
}

impl Default for ContourConfig {
    fn default() -> Self {
        Self {
            models: ModelPaths::default(),
            prevalences: vec![0.5, crate::fixtures::PANEL_PREVALENCE, 0.1, 0.01, 0.001],
            interval: None,
            resolution: 256,
        }
    }
}

impl ContourConfig {
    pub fn validate(&self) -> Result<()> {
        if self.prevalences.is_empty() && self.interval.is_none() {
            return Err(Error::Config("nothing to trace: give prevalences or an interval".into()));
        }
        if let Some(i) = self.interval {
            i.validate()?;
        }
        Ok(())
    }
}

/// Reads a partial JSON config, filling unspecified fields with defaults.
pub fn read_config<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
        }
    }
}

/// Absolute form of an input path so manifests replay from any directory.
pub fn absolute(path: &Path) -> Result<PathBuf> {
    std::fs::canonicalize(path).map_err(|e| Error::io(path, e))
}
