use thiserror::Error;

/// Failure modes shared by the solver modules.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("agent index {index} out of range for {n} agents")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("dimension mismatch: expected length {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("ill-defined centrality: {0}")]
    IllDefined(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("instance with n={n} exceeds the enumeration limit of {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("support enumeration inconsistent: {0}")]
    Inconsistent(String),

    #[error("singular linear system while computing {0}")]
    SingularSystem(&'static str),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid instance data: {0}")]
    InvalidData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
