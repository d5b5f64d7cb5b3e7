use thiserror::Error;

/// Errors raised by mesh handling, assembly and the contact solver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("assembly error in cell {cell}: {msg}")]
    Assembly { cell: usize, msg: String },

    #[error("singular system: {msg} (smallest pivot estimate {smallest_pivot:.3e}, solve residual ratio {residual_ratio:.3e})")]
    Singular {
        msg: String,
        smallest_pivot: f64,
        residual_ratio: f64,
    },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
