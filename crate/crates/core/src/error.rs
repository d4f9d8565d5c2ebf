use thiserror::Error;

/// Errors produced by the estimators, tests and evaluation helpers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PvError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite coordinate at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("point set must contain at least one point of dimension >= 1")]
    Empty,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("masses must be nonnegative and sum to 1 (sum = {sum})")]
    MassNotNormalized { sum: f64 },

    #[error("support too large for exhaustive search: {size} atoms (limit {limit})")]
    SupportTooLarge { size: usize, limit: usize },

    #[error("point {row} lies outside the unit box")]
    OutsideUnitBox { row: usize },

    #[error("invalid ranking: {0}")]
    InvalidRanking(String),
}

impl PvError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        PvError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, PvError>;
