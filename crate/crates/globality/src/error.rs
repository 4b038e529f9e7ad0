//! Crate-wide error type.

/// Errors surfaced by model evaluation, optimization, and the test pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The supplied point fails the stationarity precondition of a test that
    /// only makes sense at a converged local optimum.
    #[error("not a stationary point: restricted gradient norm {grad_norm:.3e} exceeds {limit:.3e}")]
    NotStationary { grad_norm: f64, limit: f64 },

    /// Bootstrap replicates were (numerically) identical, so no statistic can
    /// be standardized against them.
    #[error("degenerate bootstrap variance: replicate spread is numerically zero")]
    DegenerateVariance,

    #[error("singular Fisher information: eigenvalue ratio {0:.3e} below tolerance")]
    SingularFisher(f64),

    /// Direction mining found no mismatched fits, so there is nothing to
    /// decompose.
    #[error("empty score collection: no start produced a mismatched local optimum")]
    EmptyCollection,

    #[error("{dropped} of {total} bootstrap replicates failed, above the 10% limit")]
    TooManyDropped { dropped: usize, total: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
