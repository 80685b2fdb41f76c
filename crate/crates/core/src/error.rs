use thiserror::Error;

use crate::cagm::LossHistory;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: String,
        expected: String,
        actual: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite function value during evaluation: {0}")]
    Evaluation(String),

    #[error("training diverged at iteration {iteration}: {reason}")]
    Divergence {
        iteration: usize,
        reason: String,
        /// Loss history recorded up to the failing iteration.
        partial: Box<LossHistory>,
    },

    #[error("matrix is not positive semi-definite (smallest eigenvalue estimate {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("ill-conditioned data: {0}")]
    IllConditioned(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error("solver diverged at time index {time_index}")]
    SolverDivergence { time_index: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err(context: impl Into<String>, expected: impl ToString, actual: impl ToString) -> Error {
    Error::Dimension {
        context: context.into(),
        expected: expected.to_string(),
        actual: actual.to_string(),
    }
}
