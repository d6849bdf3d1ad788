use thiserror::Error;

/// Errors raised by the geometry, extraction and mass routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported dimension {0}: expected 3 <= n <= 6")]
    UnsupportedDimension(usize),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("point {0:?} is not inside the open unit ball")]
    OutsideBall(Vec<f64>),

    #[error("gradient of the defining function is undefined at the origin")]
    GradientAtOrigin,

    #[error("metric matrix is singular at {0:?}")]
    SingularMetric(Vec<f64>),

    #[error("horizon inside sampling shell: lapse factor {lapse:.6e} <= 0 at r = {radius}")]
    HorizonInShell { radius: f64, lapse: f64 },

    #[error("mass parameter must be non-negative, got {0}")]
    NegativeMass(f64),

    #[error("perturbed metric is not positive definite at {0:?}")]
    NotPositiveDefinite(Vec<f64>),

    #[error("tensor is not trace-free: relative trace {0:.3e}")]
    NotTraceFree(f64),

    #[error("matrix is not symmetric: max asymmetry {0:.3e}")]
    NotSymmetric(f64),

    #[error("invalid epsilon schedule: {0}")]
    InvalidSchedule(String),

    #[error("extraction tail diverges along direction {0:?} (metric pair outside the class)")]
    DivergentTail(Vec<f64>),

    #[error("metrics are not equivalent to order n: fitted order {order:.3}, need >= {required:.3}")]
    NotEquivalent { order: f64, required: f64 },

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("unsupported sphere dimension {0}: expected 2 <= d <= 5")]
    UnsupportedSphere(usize),

    #[error("quadrature level must be >= 1, got {0}")]
    InvalidLevel(usize),

    #[error("spherical harmonic input: {0}")]
    Harmonics(String),

    #[error("invalid parameter '{field}': {message}")]
    InvalidParameter { field: String, message: String },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;
