use thiserror::Error;

/// Errors raised anywhere in the forecasting pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid holding-time pmf: {0}")]
    InvalidPmf(String),

    #[error("invalid calendar: {0}")]
    InvalidCalendar(String),

    #[error("status {status} has no holding-time kernel (absorbing status is {absorbing})")]
    UnknownStatus { status: u32, absorbing: u32 },

    #[error("no holding-time pmf for status {status} under key {key} and no fallback configured")]
    MissingKernel { status: u32, key: String },

    #[error("invalid parcel record {parcel}: {reason}")]
    InvalidRecord { parcel: String, reason: String },

    #[error("event log is empty")]
    EmptyLog,

    #[error("no completed transitions out of status {status} for pup {pup}")]
    NoCompletedTransitions { status: u32, pup: String },

    #[error("cell (weekday {weekday}, hour {hour}) lies outside opening hours")]
    ClosedCell { weekday: u8, hour: u32 },

    #[error("insufficient history: need {need}, got {got}")]
    InsufficientHistory { need: usize, got: usize },

    #[error("evidence is impossible under the kernel: {0}")]
    ImpossibleEvidence(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("invalid quantile {0}; expected a value in [0, 1]")]
    InvalidQuantile(f64),

    #[error("conditioning event too rare: acceptance rate {rate:.2e} after {attempts} draws")]
    ConditioningTooRare { rate: f64, attempts: u64 },

    #[error("enumeration too large: {paths} paths exceeds limit {limit}")]
    TooLarge { paths: u64, limit: u64 },

    #[error("evaluation misaligned: {0}")]
    Misaligned(String),

    #[error("row {row}: {reason}")]
    Parse { row: usize, reason: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether the error stems from bad input rather than an environment failure.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
