use alloc::string::String;

/// Errors produced by the estimation toolkit.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid {what} row {row}: {reason}")]
    InvalidRow {
        what: &'static str,
        row: usize,
        reason: String,
    },
    #[error("invalid shape: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("behavior policy gives zero probability to action {action} in state {state} where the evaluation policy does not")]
    SupportViolation { state: usize, action: usize },
    #[error("action {action} in state {state} has zero probability under both policies")]
    ImpossibleObservation { state: usize, action: usize },
    #[error("sum of importance weights is zero, estimate undefined")]
    ZeroTotalWeight,
    #[error("return window starts at step {t1} but trajectory has {len} steps")]
    ReturnWindow { t1: usize, len: usize },
    #[error("evaluation and behavior policies coincide on the requested states")]
    IdenticalPolicies,
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
