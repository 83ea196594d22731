use chrono::NaiveDate;
use thiserror::Error;

use crate::series::DayIndex;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 1,
            ErrorClass::Data => 2,
            ErrorClass::Numerical => 3,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),

    #[error("line {line}: negative irradiation {value}")]
    NegativeValue { line: u64, value: f64 },

    #[error("input contains no data rows")]
    EmptyInput,

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("day of year {0} outside 1..=365")]
    DayOutOfRange(u32),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("series too short: need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("no usable value for day-of-year slot {slot} in any other year (repairing {day})")]
    UnrecoverableGap { slot: usize, day: DayIndex },

    #[error("extraterrestrial radiation is zero on {0} (polar night)")]
    ZeroExtraterrestrial(DayIndex),

    #[error("moving-average window mean is zero around {0}")]
    ZeroWindowMean(DayIndex),

    #[error("no defined value for day-of-year slot {0}")]
    EmptySlot(usize),

    #[error("missing value on {0}")]
    MissingValue(DayIndex),

    #[error("periodogram has no nonzero ordinate")]
    NoPeak,

    #[error("total spectral power is zero")]
    ZeroPower,

    #[error("singular system: {0}")]
    Singular(String),

    #[error("constant channel {channel}: min = max = {value}")]
    ConstantChannel { channel: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("training diverged: {0}")]
    NonFinite(String),

    #[error("insufficient history for {0}")]
    InsufficientHistory(String),

    #[error("nRMSE undefined: all measured values are zero")]
    ZeroMeasured,

    #[error("runs cover different day sets: {0}")]
    MismatchedRuns(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Config,
            Error::Singular(_) | Error::NonFinite(_) | Error::ZeroWindowMean(_) => ErrorClass::Numerical,
            Error::Stage { source, .. } => source.class(),
            _ => ErrorClass::Data,
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
