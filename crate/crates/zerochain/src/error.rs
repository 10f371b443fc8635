use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{what} out of range: got {got}, valid range is 1..={max}")]
    IndexOutOfRange {
        what: &'static str,
        got: usize,
        max: usize,
    },

    #[error("{what} did not converge after {max_iters} iterations (last change {last_change:.3e})")]
    NoConvergence {
        what: &'static str,
        max_iters: usize,
        last_change: f64,
    },

    #[error("iterates diverged (non-finite value encountered in {0})")]
    Diverged(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
