use thiserror::Error;

/// Errors raised by mesh handling, assembly and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("{what} did not converge after {iterations} iterations (last residual {last_residual:.3e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        last_residual: f64,
        history: Vec<f64>,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
