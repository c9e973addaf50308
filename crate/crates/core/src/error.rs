use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {key}: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("{path}:{line}: key `{key}`: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        key: String,
        reason: String,
    },

    #[error("Gram matrix at AP {ap} is numerically singular (condition number {condition:.3e})")]
    SingularGram { ap: usize, condition: f64 },

    #[error("decoding covariance for UE {ue} is not positive definite")]
    SingularMatrix { ue: usize },

    #[error("grouping is infeasible: {0}")]
    InfeasibleGrouping(String),

    #[error("rejected {rejected} degenerate trials, budget was {budget}")]
    RejectionBudgetExceeded { rejected: usize, budget: usize },

    #[error("unknown moment check `{0}`")]
    UnknownCheck(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
