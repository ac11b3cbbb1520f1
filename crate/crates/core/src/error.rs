use thiserror::Error;

/// Errors raised anywhere in the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("mesh parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("assembly error in element {element}: {msg}")]
    Assembly { element: usize, msg: String },

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("eigensolver converged {achieved} of {requested} eigenpairs: {msg}")]
    Eigen {
        requested: usize,
        achieved: usize,
        msg: String,
    },

    #[error("nonlinear solve did not converge (best residual {best_residual:.3e}): {msg}")]
    NonConvergence { best_residual: f64, msg: String },

    #[error("optimizer failure: {0}")]
    Optimizer(String),

    #[error("cache mismatch: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
