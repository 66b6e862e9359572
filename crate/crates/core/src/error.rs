use thiserror::Error;

/// Errors raised by the model, estimators and simulation engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("non-finite value for `{field}`: {value}")]
    NonFinite { field: &'static str, value: f64 },

    #[error("constraint `{name}` violated (residual {residual:.3e})")]
    ConstraintViolation { name: &'static str, residual: f64 },

    #[error("frequency `{field}` = {value} outside the open interval (0, {pump})")]
    FrequencyOutOfRange {
        field: &'static str,
        value: f64,
        pump: f64,
    },

    #[error("averaging window covers {periods:.6} periods of `{component}`, expected a whole number")]
    PartialPeriod {
        component: &'static str,
        periods: f64,
    },

    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),

    #[error("setting (theta1 = {theta1}, theta2 = {theta2}) not present in record")]
    SettingNotFound { theta1: f64, theta2: f64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty outcome column")]
    EmptyColumn,

    #[error("column `{column}` row {row}: value {value} is not +1 or -1")]
    NotPlusMinusOne {
        column: String,
        row: usize,
        value: i64,
    },

    #[error("dataset is missing column `{0}`")]
    MissingColumn(String),

    #[error("dataset line {line}, column `{column}`: {message}")]
    Dataset {
        line: u64,
        column: String,
        message: String,
    },

    #[error("resource exhausted: {0}")]
    ResourceExhausted(String),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

pub(crate) fn ensure_finite(field: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(ModelError::NonFinite { field, value })
    }
}
