//! Error type shared by every module of the probe.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure category, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad parameter or configuration value.
    Parameter,
    /// Input data failed validation (NaN, shape mismatch, bad labels).
    Validation,
    /// A numerical routine could not produce a result.
    Numerical,
    /// Filesystem or encoding failure.
    Io,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-finite value {value} at row {row}, column {col}")]
    NonFinite { row: usize, col: usize, value: f64 },

    #[error("size error: {0}")]
    Size(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("layer `{layer}`: {source}")]
    Layer {
        layer: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NonFinite { .. } | Error::Size(_) | Error::Validation(_) => ErrorKind::Validation,
            Error::Parameter(_) | Error::Config(_) => ErrorKind::Parameter,
            Error::Numerical(_) => ErrorKind::Numerical,
            Error::Io { .. } | Error::Format { .. } => ErrorKind::Io,
            Error::Layer { source, .. } => source.kind(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format { path: path.into(), message: message.into() }
    }

    /// Tags an error with the layer it came from.
    pub fn in_layer(self, layer: &str) -> Self {
        Error::Layer { layer: layer.to_string(), source: Box::new(self) }
    }
}
