use thiserror::Error;

/// Errors raised by constructors, classifiers and integrators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("matrix must be non-empty and square with finite entries: {0}")]
    InvalidMatrix(String),

    #[error("not in SL(n): |det - 1| = {deviation:e} exceeds {tolerance:e}")]
    NotInGroup { deviation: f64, tolerance: f64 },

    #[error("matrix is singular or has non-positive determinant (det = {det:e})")]
    NotPositiveDeterminant { det: f64 },

    #[error("polar iteration did not converge after {iterations} iterations (residual {residual:e})")]
    PolarNoConvergence { iterations: usize, residual: f64 },

    #[error(
        "nilpotency verdicts disagree: power test gives {power_index:?}, trace test gives {traces_vanish} (ill-conditioned input)"
    )]
    NilpotencyInconsistent {
        power_index: Option<usize>,
        traces_vanish: bool,
    },

    #[error("matrix is not special orthogonal (residual {residual:e})")]
    NotSpecialOrthogonal { residual: f64 },

    #[error("vector is not tangent to SL(n) at its base point (|tr(A^-1 X)| = {residual:e})")]
    NotTangent { residual: f64 },

    #[error("tangent vectors are based at different points")]
    BaseMismatch,

    #[error("tangent vectors are (nearly) parallel: relative Gram determinant {relative_gram:e}")]
    Parallel { relative_gram: f64 },

    #[error("matrix is not in sl(n): tr = {trace:e}")]
    NotTraceless { trace: f64 },

    #[error("matrix is not nilpotent")]
    NotNilpotent,

    #[error("(B, C) is not a rotational exponential geodesic")]
    NotRotational,

    #[error("invalid state, violated invariant: {0}")]
    InvalidState(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, GeoError>;

impl From<std::io::Error> for GeoError {
    fn from(e: std::io::Error) -> Self {
        GeoError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for GeoError {
    fn from(e: serde_json::Error) -> Self {
        GeoError::Parse(e.to_string())
    }
}

impl From<csv::Error> for GeoError {
    fn from(e: csv::Error) -> Self {
        GeoError::Io(e.to_string())
    }
}
