use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by model evaluation and fitting.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),

    /// An observed event sits where the intensity (or the exposure) is zero.
    #[error("data inconsistency in unit {unit}: {reason} at t = {time}")]
    DataInconsistency {
        unit: String,
        time: f64,
        reason: String,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("rank deficient design; offending columns: {columns:?}")]
    RankDeficient { columns: Vec<String> },

    #[error("complete separation detected")]
    Separation,

    #[error("zero dispersion: all values are equal")]
    ZeroDispersion,

    #[error("unknown module {0:?}")]
    UnknownModule(String),

    #[error("duplicate design rows {0} and {1}")]
    DuplicateRows(usize, usize),

    #[error("intensity is unbounded on the window")]
    UnboundedIntensity,

    #[error("budget must be positive")]
    ZeroBudget,

    #[error("empty evaluation grid")]
    EmptyGrid,
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
