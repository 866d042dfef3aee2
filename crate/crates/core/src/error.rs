use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("action {action} out of range for {n_actions} actions")]
    ActionOutOfRange { action: usize, n_actions: usize },

    #[error("reward must be 0 or 1, got {0}")]
    InvalidReward(u8),

    #[error("logged feedback is empty")]
    EmptyLog,

    #[error("logged feedback contains fewer than two distinct actions")]
    DegenerateLog,

    #[error("propensity at row {row} must be positive, got {value}")]
    NonPositivePropensity { row: usize, value: f64 },

    #[error("internal numerical error: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, SimError>;
