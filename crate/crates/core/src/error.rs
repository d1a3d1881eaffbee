use thiserror::Error;

/// Errors produced by the learning pipeline and its numerical kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{what} does not sum to 1 (sum = {sum})")]
    NotNormalized { what: &'static str, sum: f64 },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("iteration did not converge in {iterations} steps: {detail}")]
    NoConvergence { iterations: usize, detail: String },

    #[error("refinement eliminated every item (sigma = {sigma})")]
    DegenerateRefinement { sigma: f64 },

    #[error("estimated covariance has rank 0")]
    DegenerateSubspace,

    #[error("spike matching failed on direction {direction} after {attempts} attempts")]
    MatchingFailed { direction: usize, attempts: usize },

    #[error("binomial coefficients overflow 64-bit integers for size {0}")]
    Overflow(usize),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
