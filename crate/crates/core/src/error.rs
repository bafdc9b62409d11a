use thiserror::Error;

/// Errors raised by the simulation, optimization and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DqapError {
    #[error("invalid lattice: {0}")]
    InvalidSpec(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("open shell: levels {lower} and {upper} are degenerate (gap {gap:e})")]
    OpenShell { lower: usize, upper: usize, gap: f64 },

    #[error("singular overlap matrix (|det| relative to column norms = {0:e})")]
    SingularOverlap(f64),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("fock basis of dimension {dim} exceeds the cap of {cap}")]
    SizeLimitExceeded { dim: usize, cap: usize },

    #[error("density-matrix eigenvalue {0} lies outside [0, 1]")]
    EigenvalueOutOfRange(f64),

    #[error("no convergence: {0}")]
    NoConvergence(String),
}

pub type Result<T> = std::result::Result<T, DqapError>;
