use thiserror::Error;

/// Errors produced anywhere in the forecasting pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: incomplete day {date}: expected 48 intervals, found {found}")]
    IncompleteDay {
        line: u64,
        date: String,
        found: usize,
    },
    #[error("line {line}: non-consecutive dates: {prev} followed by {next}")]
    NonConsecutiveDates {
        line: u64,
        prev: String,
        next: String,
    },
    #[error("line {line}: dew point exceeds minimum temperature ({t_dew} > {t_min})")]
    DewAboveMin { line: u64, t_dew: f64, t_min: f64 },
    #[error("line {line}: minimum temperature exceeds maximum temperature ({t_min} > {t_max})")]
    MinAboveMax { line: u64, t_min: f64, t_max: f64 },
    #[error("line {line}: temperature {value} outside plausible range [-60, 60]")]
    OutOfRange { line: u64, value: f64 },
    #[error("invalid sample: {0}")]
    InvalidSample(String),
    #[error("station file contains no data rows")]
    EmptySeries,
    #[error("insufficient days: need at least {needed}, have {have}")]
    InsufficientDays { needed: usize, have: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("zero variance in training data")]
    ZeroVariance,
    #[error("degenerate predictors: design matrix is rank deficient")]
    DegeneratePredictors,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("training aborted: non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("run {run}: {source}")]
    RunFailed {
        run: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("station mismatch: expected {expected}, found {found}")]
    StationMismatch { expected: String, found: String },
    #[error("unknown version: {0}")]
    UnknownVersion(String),
    #[error("method tag mismatch: expected {expected}, found {found}")]
    MethodMismatch { expected: String, found: String },
    #[error("corrupt payload: {0}")]
    CorruptPayload(String),
    #[error("malformed table: {0}")]
    MalformedTable(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors raised while optimizing a model, as opposed to bad input.
    pub fn is_training_abort(&self) -> bool {
        match self {
            Error::NonFiniteLoss { .. } => true,
            Error::RunFailed { source, .. } => source.is_training_abort(),
            _ => false,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
