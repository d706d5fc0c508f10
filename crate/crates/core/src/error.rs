use thiserror::Error;

/// Errors raised by the simulation, analysis and configuration layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("state became non-finite at t = {time} (step too large?)")]
    NonFiniteState { time: f64 },

    #[error("trajectory {index}: {source}")]
    Trajectory {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("effective potential is undefined for V = 0")]
    DegenerateInteraction,

    #[error("noise signal evaluated at t = {time}, outside [{start}, {end}]")]
    OutOfSpan { time: f64, start: f64, end: f64 },

    #[error("time series is empty")]
    EmptySeries,

    #[error("invalid time series: {0}")]
    InvalidSeries(String),

    #[error("histogram has no counts in the second-peak window")]
    NoSecondPeak,

    #[error("histogram does not cover [0, {needed}]")]
    HistogramTooShort { needed: f64 },

    #[error("no interval fell in the scan window at any grid point")]
    AllZeroCounts,

    #[error("no jumps detected")]
    NoJumpsDetected,

    #[error("need at least {needed} non-empty bins, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),

    #[error("`{key}` out of range: {message}")]
    OutOfRange { key: String, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn out_of_range(key: &str, message: impl Into<String>) -> Self {
        Error::OutOfRange {
            key: key.to_string(),
            message: message.into(),
        }
    }

    /// Coarse category used for process exit codes.
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Parse { .. }
            | Error::UnknownKey(_)
            | Error::OutOfRange { .. }
            | Error::Config(_) => ErrorCategory::Config,
            Error::Io(_) => ErrorCategory::Io,
            Error::NonFiniteState { .. } | Error::Trajectory { .. } => ErrorCategory::Numerical,
            _ => ErrorCategory::Analysis,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Io,
    Numerical,
    Analysis,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::Io => 3,
            ErrorCategory::Numerical => 4,
            ErrorCategory::Analysis => 5,
        }
    }
}
