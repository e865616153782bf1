use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected}, found {found}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        found: String,
    },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("gradient tape is stale or missing: it does not belong to the current parameters")]
    StaleTape,

    #[error("no samples survived the epsilon filter; resample before assigning")]
    EmptyAcceptedSet,

    #[error("projected row {row} has zero norm and cannot be normalized")]
    ZeroNormProjection { row: usize },

    #[error(
        "epsilon {epsilon} is degenerate: 0 of {proposals} proposals accepted \
         (acceptance rate {acceptance_rate})"
    )]
    DegenerateEpsilon {
        epsilon: f64,
        proposals: usize,
        acceptance_rate: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cdf value {value} at t = {t} lies outside [0, 1]")]
    InvalidProbability { t: f64, value: f64 },

    #[error("density ratio is unbounded at t = {t}: proposal cdf reached 1")]
    UnboundedRatio { t: f64 },

    #[error("truncation point keeps zero probability mass")]
    ZeroTruncationMass,

    #[error("covariance is not positive semi-definite (smallest eigenvalue {min_eigenvalue})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("need more than {needed} points, found {found}")]
    TooFewPoints { needed: usize, found: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(
        op: &'static str,
        expected: impl std::fmt::Display,
        found: impl std::fmt::Display,
    ) -> Self {
        Error::ShapeMismatch {
            op,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
