use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure classes; the CLI maps these onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("column `{0}` not found in CSV header")]
    MissingColumn(String),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("every record was rejected during preprocessing")]
    AllRejected,
    #[error("point ({x}, {y}) lies outside the domain [{lo}, {hi}]^2")]
    OutsideDomain { x: f64, y: f64, lo: f64, hi: f64 },
    #[error("density has zero mass on the domain")]
    ZeroMass,
    #[error("non-finite density value encountered at ({x}, {y})")]
    NonFinite { x: f64, y: f64 },
    #[error("rejection sampler acceptance rate {rate:.3e} is below the floor {floor:.0e}")]
    LowAcceptance { rate: f64, floor: f64 },
    #[error("prevalence estimator undefined: |P_p - N_p| = {separation:.3e} <= {epsilon:.0e}")]
    Separation { separation: f64, epsilon: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("adaptive loop aborted after {} completed iteration(s): {source}", completed.len())]
    AdaptiveAborted {
        completed: Vec<crate::prevalence::PrevalenceEstimate>,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) => ErrorClass::Config,
            Error::ZeroMass | Error::NonFinite { .. } | Error::LowAcceptance { .. } | Error::Separation { .. } => {
                ErrorClass::Numerical
            }
            Error::AdaptiveAborted { source, .. } => source.class(),
            _ => ErrorClass::Data,
        }
    }
}
