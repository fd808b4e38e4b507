use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("degenerate series `{0}`: standard deviation is zero")]
    DegenerateSeries(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("series kind error: {0}")]
    Kind(String),

    #[error("alignment error: no common years ({0})")]
    Alignment(String),

    #[error("backend error (retryable={retryable}): {message}")]
    Backend { message: String, retryable: bool },

    #[error("invalid draft for year {year}: {message}")]
    InvalidDraft { year: i32, message: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("rank error: {0}")]
    Rank(String),

    #[error("contract error: {0}")]
    Contract(String),

    #[error("numeric error in {stage}: {message}")]
    Numeric { stage: String, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("checkpoint integrity error: {0}")]
    Integrity(String),

    #[error("checkpoint version {found} cannot be migrated (expected {expected})")]
    Migration { found: u32, expected: u32 },

    #[error("store error: {0}")]
    Store(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn numeric(stage: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Numeric {
            stage: stage.into(),
            message: message.into(),
        }
    }

    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Backend { retryable: true, .. })
    }

    /// Process exit code for the CLI: 1 for bad input or configuration, 2 for
    /// failures at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Backend { .. }
            | Error::Numeric { .. }
            | Error::Store(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => 2,
            _ => 1,
        }
    }
}
