use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by shutterforge operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("out of bounds: {0}")]
    Bounds(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("{path}: format error at byte offset {offset}: {msg}")]
    Format {
        path: PathBuf,
        offset: u64,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: png import failed: {msg}")]
    Import { path: PathBuf, msg: String },

    #[error("ingestion failed: {0}")]
    Ingest(String),

    #[error("pipeline error: {0}")]
    Pipeline(String),

    #[error("manifest error: {0}")]
    Manifest(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::Bounds(_) => "bounds",
            Error::Argument(_) => "argument",
            Error::InvalidValue(_) => "invalid_value",
            Error::Numeric(_) => "numeric",
            Error::Degenerate(_) => "degenerate",
            Error::Format { .. } => "format",
            Error::Io { .. } => "io",
            Error::Import { .. } => "import",
            Error::Ingest(_) => "ingest",
            Error::Pipeline(_) => "pipeline",
            Error::Manifest(_) => "manifest",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn ensure_same_dims(
    what: &str,
    a: (usize, usize),
    b: (usize, usize),
) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!(
            "{what}: {}x{} vs {}x{}",
            a.0, a.1, b.0, b.1
        )));
    }
    Ok(())
}
