use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} is out of range (expected {expected})")]
    Range {
        what: &'static str,
        value: String,
        expected: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("horizon {requested} exceeds the exact ground-truth cap of {cap} rounds; raise the cap to proceed")]
    Resource { cap: usize, requested: usize },

    #[error("protocol misuse: {0}")]
    Usage(String),

    #[error("horizon exhausted")]
    EndOfHorizon,

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn range(what: &'static str, value: impl ToString, expected: impl ToString) -> Self {
        Error::Range {
            what,
            value: value.to_string(),
            expected: expected.to_string(),
        }
    }
}
