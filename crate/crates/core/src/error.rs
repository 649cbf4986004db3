use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("sum diverged (partial sum {partial} after {terms} terms)")]
    Diverged { partial: f64, terms: usize },

    #[error("numerical failure in {what}: achieved error {achieved:e}, requested {requested:e}")]
    Numerical {
        what: String,
        achieved: f64,
        requested: f64,
    },

    #[error("linear solve failed{}: relative residual {residual:e}", realization.map(|r| format!(" (realization {r})")).unwrap_or_default())]
    Solver {
        residual: f64,
        realization: Option<u64>,
    },

    #[error("degenerate fit: {0}")]
    FitDegenerate(String),

    #[error("truncation box too small: {0}")]
    EnlargeDomain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Attach a realization index to a solver failure.
    pub fn with_realization(self, index: u64) -> Self {
        match self {
            Error::Solver { residual, .. } => Error::Solver {
                residual,
                realization: Some(index),
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
