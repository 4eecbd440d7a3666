use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{what} is not positive definite (smallest eigenvalue {min_eig:e})")]
    NotPositiveDefinite { what: &'static str, min_eig: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("training diverged at iteration {iteration}: ELBO is not finite")]
    Divergence { iteration: usize },

    #[error("terminal mean unreachable: reachability matrix has rank {rank}, need {required}")]
    Unreachable { rank: usize, required: usize },

    #[error("covariance steering infeasible at step {step}: {detail}")]
    SteeringInfeasible { step: usize, detail: String },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("parse error at `{field}`: {message}")]
    Parse { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
