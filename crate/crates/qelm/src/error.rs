use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
///
/// Variants group into the three failure classes the CLI maps to distinct
/// exit codes: configuration, I/O and file parsing, and numerics/shape.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value or inconsistent run setup.
    #[error("config: {0}")]
    Config(String),

    /// Filesystem failure while reading or writing an artifact.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file exists but its contents are malformed. `line` is 1-based.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// Dimension or index mismatch between operands.
    #[error("shape: {0}")]
    Shape(String),

    /// Numerically invalid input or result (non-finite, degenerate, ...).
    #[error("numeric: {0}")]
    Numeric(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
