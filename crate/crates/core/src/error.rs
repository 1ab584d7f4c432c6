use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    /// The linearised below-threshold model diverges as 2μ²+ξ²→1.
    #[error(
        "pump at or above the oscillation threshold (2μ²+ξ² → 1): \
         threshold expression = {expression:.12}, margin = {margin:.3e}"
    )]
    Threshold { expression: f64, margin: f64 },

    #[error("trajectory {trajectory} diverged (seed {seed})")]
    Divergent { seed: u64, trajectory: u64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Builds a threshold error from the effective value of 2μ²+ξ²
    /// (the squared spectral radius of the coupling pattern).
    pub(crate) fn threshold(expression: f64) -> Self {
        Error::Threshold {
            expression,
            margin: 1.0 - expression,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
