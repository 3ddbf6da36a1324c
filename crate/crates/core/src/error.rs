use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HhcError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: expected {expected}, found {found}")]
    GridMismatch { expected: String, found: String },
    #[error("flux direction mismatch: expected {expected}, found {found}")]
    DirectionMismatch { expected: usize, found: usize },
    #[error("non-finite value {value} at {location}")]
    NonFinite { location: String, value: f64 },
    #[error("invalid coefficients: {0}")]
    InvalidCoefficients(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("iterative solver did not converge in {iterations} iterations (relative residual {residual:e})")]
    SolverDiverged { iterations: usize, residual: f64 },
    #[error("stability precondition violated: {0}")]
    Stability(String),
    #[error("missing problem data: {0}")]
    MissingData(String),
    #[error("unknown identifier `{0}`")]
    Unknown(String),
    #[error("dense assembly limited to {limit} unknowns, requested {requested}")]
    TooLarge { limit: usize, requested: usize },
    #[error("snapshot format: {0}")]
    Snapshot(String),
}

pub type Result<T> = std::result::Result<T, HhcError>;
