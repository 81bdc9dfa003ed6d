//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad argument to a numerical routine (non-finite data, negative index, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Inconsistent run or experiment configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A solution exceeded the sup-norm guard or became non-finite.
    #[error("blow-up at time {time}: sup norm {sup_norm:e} exceeds guard")]
    BlowUp { time: f64, sup_norm: f64 },

    /// An initial perturbation larger than the allowed budget.
    #[error("perturbation size {size:e} exceeds budget {budget:e}")]
    BudgetViolation { size: f64, budget: f64 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for failures of the numerics themselves, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::BlowUp { .. })
    }
}
