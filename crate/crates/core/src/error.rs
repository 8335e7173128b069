use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("action {index} out of range (valid: 0..={max})")]
    ActionOutOfRange { index: usize, max: usize },

    #[error("step called on a finished episode")]
    EpisodeDone,

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("environment invariant violated: {0}")]
    InvariantViolation(String),

    #[error("no finished jobs to aggregate")]
    NoFinishedJobs,

    #[error("censored at the step cap: {0}")]
    Censored(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("malformed metrics log: {0}")]
    MalformedLog(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
