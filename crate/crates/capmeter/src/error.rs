use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] capmeter_core::Error),

    /// Malformed uploaded CSV; `line` is 1-based and counts the header.
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },

    #[error("csv: {0}")]
    CsvFormat(String),

    #[error("invalid request: {0}")]
    Validation(String),

    #[error("unsupported schema_version {found}; this build reads version {expected}")]
    SchemaVersion { found: u64, expected: u32 },

    #[error("session `{0}` not found")]
    NotFound(String),

    #[error("{0}")]
    Conflict(String),

    #[error("session limit of {0} reached")]
    SessionLimit(usize),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn csv(line: usize, message: impl Into<String>) -> Self {
        Self::Csv { line, message: message.into() }
    }
}
