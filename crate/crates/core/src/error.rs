use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point outside domain: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("no closed-form mean embedding for {0}; use empirical_embedding")]
    UnsupportedEmbedding(String),

    #[error("Gram matrix singular beyond jitter; nodes {i} and {j} are nearly collinear")]
    Conditioning { i: usize, j: usize },

    #[error("solver failed after {iterations} iterations, worst KKT violation {kkt_violation:e}")]
    Solver {
        iterations: usize,
        kkt_violation: f64,
    },

    #[error("degenerate search direction (zero norm)")]
    DegenerateDirection,

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
