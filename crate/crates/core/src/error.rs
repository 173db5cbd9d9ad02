use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument was outside the domain of a special function.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("slice sampler failed: {0}")]
    SamplerFailure(String),

    /// Cholesky factorization failed even after jitter escalation.
    #[error("covariance is not positive definite (last jitter {jitter:e})")]
    NonPsd { jitter: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    /// A merge time precedes the creation time of one of its children.
    #[error("time convention violated: t_prev {t_prev} < child creation time {created_at}")]
    Convention { t_prev: f64, created_at: f64 },

    #[error("degenerate merge: {0}")]
    DegenerateMerge(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),
}
