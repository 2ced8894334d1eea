use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix must be square with n >= 1")]
    NotSquare,

    #[error("subspace is {{0}}: the condition holds vacuously")]
    VacuousSubspace,

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:e})")]
    NotPsd { min_eig: f64 },

    #[error("eigenvalue {eigenvalue} exceeds the admissible bound {bound}")]
    OutsideBand { eigenvalue: f64, bound: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("generalized Jacobian enumeration unavailable: {0}")]
    EnumerationUnavailable(String),

    #[error("too many activity patterns ({count}); limit is {limit}")]
    TooManyPatterns { count: u64, limit: u64 },

    #[error("v is not a subgradient at x (prox residual {residual:e})")]
    NotSubgradient { residual: f64 },

    #[error("point is not stationary (residual {residual:e})")]
    NotStationary { residual: f64 },

    #[error("point is not in the set (distance {distance:e})")]
    NotInSet { distance: f64 },

    #[error("direction is not tangent (ratio {ratio:e})")]
    NotTangent { ratio: f64 },

    #[error("function value is infinite at the base point")]
    InfiniteValue,

    #[error("singular Newton matrix at iteration {iteration}")]
    NewtonBreakdown {
        iteration: usize,
        matrix: Vec<Vec<f64>>,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
