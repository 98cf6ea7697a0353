//! Parametric and gridded densities on the log-measurement plane.

mod fit;
mod gridded;
pub mod io;
mod noise;
mod params;
mod sampling;
mod shape;
mod truncated;

pub use fit::{fit_mle, initial_guess, log_likelihood, FitOptions, FitResult, MIN_FIT_POINTS};
pub use gridded::{GridMeta, GriddedValues};
pub use noise::{convolve_noise, NoiseKernel};
pub use params::{ModelFamily, NegativeModelParams, ParametricModel, PositiveModelParams};
pub use sampling::{sample, Sampler, ACCEPTANCE_FLOOR};
pub use shape::{eval_negative_shape, eval_positive_shape, NegativeKernel, PositiveKernel, ShapeKernel};
pub use truncated::{normalize, DensityModel, NormalizationCheck, TruncatedDensity, NORMALIZATION_TOLERANCE};
