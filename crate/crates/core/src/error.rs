use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("duplicate input row {index}")]
    DuplicateInput { index: usize },

    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("covariance matrix is singular even with nugget {nugget:e}")]
    SingularCovariance { nugget: f64 },

    #[error("index {index} out of range for {len} points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("level {level} invalid for an emulator with {levels} levels")]
    InvalidLevel { level: usize, levels: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate leave-one-out error distribution (zero mean and variance)")]
    DegenerateError,

    #[error("regressor has zero variance; cannot estimate rho")]
    DegenerateRegressor,

    #[error("target values are constant; NRMSE undefined")]
    ConstantTruth,

    #[error("simulator failed at level {level}: {message}")]
    Simulator { level: usize, message: String },

    #[error("budget {budget} cannot pay for the cheapest step ({cheapest})")]
    BudgetTooSmall { budget: f64, cheapest: f64 },

    #[error("seed {seed}: {source}")]
    AtSeed { seed: u64, source: Box<Error> },

    #[error("iteration {iteration}: {source}")]
    AtIteration { iteration: usize, source: Box<Error> },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
