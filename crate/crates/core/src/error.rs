//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("row {line}: {message}")]
    Row { line: usize, message: String },

    #[error(
        "sensor {sensor} emitted two events for case {case_id} at t={timestamp}: \
         {first_event} and {second_event}"
    )]
    EventConflict {
        sensor: String,
        case_id: String,
        timestamp: u64,
        first_event: String,
        second_event: String,
    },

    #[error("feature {0} has no observed value anywhere; cannot impute")]
    UnimputableFeature(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("insufficient data: need at least {needed} labeled samples, have {have}")]
    InsufficientData { needed: usize, have: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("budget {budget} exceeds pool size {pool_size}")]
    Budget { budget: usize, pool_size: usize },

    #[error("strategy unavailable: {0}")]
    StrategyUnavailable(String),

    #[error("strategy degenerate: {0}")]
    StrategyDegenerate(String),

    #[error("undefined measure: {0}")]
    UndefinedMeasure(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("duplicate labeled sample ({case_id}, t={timestamp})")]
    DuplicateLabel { case_id: String, timestamp: u64 },

    #[error("model is not fitted")]
    NotFitted,

    #[error("run `{name}` (fingerprint {fingerprint}) failed: {source}")]
    Run {
        name: String,
        fingerprint: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for the error kinds a scheduler is allowed to recover from by
    /// falling back to random selection mid-run.
    pub fn is_strategy_fallback(&self) -> bool {
        matches!(
            self,
            Error::StrategyUnavailable(_) | Error::StrategyDegenerate(_)
        )
    }
}
