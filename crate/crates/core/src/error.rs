use thiserror::Error;

/// Errors raised by the model, the solvers and the auditors.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("invalid initial data: {0}")]
    InvalidData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("tolerance not met at t = {t}: step size {h} underflowed")]
    ToleranceNotMet { t: f64, h: f64 },

    #[error("step budget of {0} exhausted")]
    TooManySteps(usize),

    #[error("non-finite state at t = {0}")]
    NonFinite(f64),

    #[error("blow-up detected at t = {t}: {reason}")]
    BlowUp { t: f64, reason: String },

    #[error("sample grids do not match")]
    GridMismatch,

    #[error("wrong regime: {0}")]
    WrongRegime(String),

    #[error("sample grid is missing t = {0}")]
    MissingSample(f64),

    #[error("empty fitting window [{lo}, {hi}] ({count} samples, need {need})")]
    EmptyWindow { lo: f64, hi: f64, count: usize, need: usize },

    #[error("non-positive value {value} at t = {t} cannot be fitted on a log scale")]
    NonPositive { t: f64, value: f64 },

    #[error("initial data has no component on eigenvalue nu")]
    MissingV1,
}

pub type Result<T> = std::result::Result<T, Error>;
