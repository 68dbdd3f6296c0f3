//! Shared error type for the whole crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (dimension relations, layer sets, thresholds).
    #[error("configuration error: {0}")]
    Config(String),

    /// Invalid input to an operation (empty input, overflow, length mismatch).
    #[error("input error: {0}")]
    Input(String),

    /// Layer or token index outside the valid range.
    #[error("index error: {0}")]
    Index(String),

    /// Probe dataset is unusable (single class, geometry mismatch, too small).
    #[error("dataset error: {0}")]
    Dataset(String),

    /// A metric is undefined on the given records (empty set, zero denominator).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Percentage difference against a zero baseline.
    #[error("undefined delta: baseline value is zero for {0}")]
    UndefinedDelta(String),

    /// A verification pipeline stage failed.
    #[error("pipeline error at stage {stage}: {message}")]
    Pipeline { stage: usize, message: String },

    /// The judge reply could not be parsed.
    #[error("judge error: {message} (raw reply: {raw:?})")]
    Judge { message: String, raw: String },

    /// Dataset file failed to load or validate.
    #[error("load error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Load { line: Option<usize>, message: String },

    /// Report construction failed (missing baseline cells).
    #[error("report error: {0}")]
    Report(String),

    /// A generation backend failed (endpoint, exhausted mock, missing weights).
    #[error("backend error: {0}")]
    Backend(String),

    /// Invariant violation inside the library.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code the CLI maps this error to: 2 for data/config
    /// problems, 3 for backend failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Backend(_) | Error::Pipeline { .. } | Error::Judge { .. } => 3,
            _ => 2,
        }
    }
}
