//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing or misnamed column: expected header `{expected}`, got `{got}`")]
    MissingColumn { expected: String, got: String },

    #[error("beam {beam_id}: non-hourly timestamp step at hour {at} (previous {prev})")]
    NonHourlyGap { beam_id: String, at: i64, prev: i64 },

    #[error("beam {beam_id}: negative traffic value {value} at hour {at}")]
    NegativeValue { beam_id: String, at: i64, value: f64 },

    #[error("beam {beam_id}: series shape differs from beam {reference} ({detail})")]
    UnequalSeriesLength {
        beam_id: String,
        reference: String,
        detail: String,
    },

    #[error("dataset contains no rows")]
    EmptyDataset,

    #[error("window (context {context} + horizon {horizon}) exceeds series length {len}")]
    WindowTooLong {
        context: usize,
        horizon: usize,
        len: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("input sequence is empty")]
    EmptySequence,

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("sigma must be strictly positive, got {0}")]
    NonPositiveSigma(f64),

    #[error("probability must lie in (0, 1), got {0}")]
    InvalidProbability(f64),

    #[error("incompatible allocation policy: {0}")]
    IncompatiblePolicy(String),

    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    #[error("no evaluation records to summarize")]
    EmptyLog,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("csv error: {0}")]
    CsvParse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Distinguishes bad-input errors (CLI exit code 1) from runtime
    /// failures such as I/O (exit code 2).
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Json(_))
    }
}
