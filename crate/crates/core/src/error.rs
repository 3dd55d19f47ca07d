//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("mesh parse error in {path} line {line}: {msg}")]
    MeshParse { path: String, line: usize, msg: String },

    #[error("mesh validation failed: {0}")]
    MeshInvalid(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("assembly failed: {0}")]
    Assembly(String),

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("array layout error: {0}")]
    Layout(String),

    #[error("composition did not converge after {iterations} iterations (last term ratio {ratio:.3e})")]
    Divergence { iterations: usize, ratio: f64 },

    #[error("file format error in {path}: {msg}")]
    FileFormat { path: String, msg: String },

    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    /// Process exit code taxonomy: 2 validation, 3 numerical, 4 verification.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Argument(_)
            | Error::MeshParse { .. }
            | Error::MeshInvalid(_)
            | Error::Config(_)
            | Error::Layout(_)
            | Error::FileFormat { .. }
            | Error::Io(_) => 2,
            Error::Assembly(_) | Error::Solver(_) | Error::Divergence { .. } => 3,
            Error::Verification(_) => 4,
        }
    }
}
