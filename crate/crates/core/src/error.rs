use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("adjacency matrix is not irreducible")]
    NotIrreducible,

    #[error("fixed-vector iteration did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("target mass must be positive, got {0}")]
    ZeroMass(f64),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("time step {dt} violates the stability bound {limit}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("boundary system is numerically singular at lambda = {lambda}")]
    SystemSingular { lambda: f64 },

    #[error("exp(D) overflows at lambda = {lambda} (D(1) = {exponent}); use a smaller lambda or a finer grid")]
    QuadratureOverflow { lambda: f64, exponent: f64 },

    #[error("Neumann series diverging at lambda = {lambda} after {terms} terms: {reason}")]
    SeriesDiverging {
        lambda: f64,
        terms: usize,
        reason: String,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
