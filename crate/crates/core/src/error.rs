use thiserror::Error;

use crate::config::ConfigRule;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),

    #[error("power {power} is outside [0, {dim})")]
    PowerOutOfRange { power: usize, dim: usize },

    #[error("invalid configuration (M={tx}, N={rx}, T={coherence}, d={dim}): {rule}")]
    InvalidConfig {
        tx: usize,
        rx: usize,
        coherence: usize,
        dim: usize,
        rule: ConfigRule,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("symbol norm {norm} is not 1")]
    NonUnitSymbol { norm: f64 },

    #[error("codeword energy {energy} differs from the coherence time {expected}")]
    PowerConstraint { energy: f64, expected: f64 },

    #[error("code construction check failed: {0}")]
    Construction(String),

    #[error("invalid codebook: {0}")]
    Codebook(String),

    #[error("codebook line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("run config {path}: {msg}")]
    RunConfig { path: String, msg: String },

    #[error("invalid experiment: {0}")]
    Experiment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn mismatch(expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// True for failures caused by the filesystem rather than by the inputs.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_)) || matches!(self, Error::Csv(e) if e.is_io_error())
    }
}
