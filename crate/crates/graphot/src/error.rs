use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum GraphotError {
    /// Malformed input text; carries the 1-based line number.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// The described graph is not connected.
    #[error("graph is not connected: {0}")]
    Disconnected(String),

    /// Structurally invalid input (self-loop, duplicate edge, bad mass, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// Vertex or edge index outside the valid range.
    #[error("index {index} out of range (size {size})")]
    IndexOutOfRange { index: usize, size: usize },

    /// Vector length does not match the expected dimension.
    #[error("shape mismatch: expected length {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Positive flow through a zero-mass vertex, or an unreachable target.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Advection step-size guard tripped.
    #[error("unstable step size: {0}")]
    Stability(String),

    /// Iterative solver hit its iteration cap; carries residual snapshots
    /// (iteration, primal residual, dual residual, objective).
    #[error("solver did not converge within {iterations} iterations (primal {primal:.3e}, dual {dual:.3e})")]
    NonConvergence {
        iterations: usize,
        primal: f64,
        dual: f64,
        history: Vec<(usize, f64, f64, f64)>,
    },

    /// Problem size exceeds a configured guard.
    #[error("size guard: {0}")]
    SizeGuard(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GraphotError>;
