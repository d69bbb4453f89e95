use thiserror::Error;

/// Crate-wide error type.
///
/// `Config` and `Schema` indicate bad inputs (CLI exit code 2); everything
/// else is a runtime failure (exit code 1).
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor shape or dimension mismatch.
    #[error("shape error: {0}")]
    Shape(String),

    /// Invalid configuration or validation failure.
    #[error("config error: {0}")]
    Config(String),

    /// A data file violated its schema.
    #[error("schema error{}: {msg}", record.map(|r| format!(" (record {r})")).unwrap_or_default())]
    Schema {
        /// Zero-based record (line) index, when known.
        record: Option<usize>,
        msg: String,
    },

    /// A numeric operation produced NaN or infinity.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn schema(record: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Schema { record, msg: msg.into() }
    }

    /// True for errors caused by bad user input rather than runtime failure.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Schema { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
