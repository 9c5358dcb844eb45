//! Crate-wide error type.

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad configuration or usage: invalid parameters, missing schema keys,
    /// inconsistent dimensions between artifacts.
    #[error("config error: {0}")]
    Config(String),

    /// A malformed input line, reported with its 1-based line number.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Data that cannot support the requested operation (empty dataset,
    /// fully censored sample, zero variance, single-class labels, ...).
    #[error("data error: {0}")]
    Data(String),

    /// Mismatched vector/matrix dimensions.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A non-finite value where a finite one is required.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// An index outside a table or grid.
    #[error("out of range: {0}")]
    Range(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
}
