use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("control value {value} at interval {index} is outside [0, 1]")]
    ControlOutOfRange { index: usize, value: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("grid mismatch: expected {expected} samples, got {actual}")]
    GridMismatch { expected: usize, actual: usize },

    #[error("singular step matrix at step size h = {h}")]
    SingularStep { h: f64 },

    #[error("trajectory has no {0} attached")]
    MissingSeries(&'static str),

    #[error("brute-force search of {levels}^{segments} candidates exceeds the budget of {budget}")]
    CombinatorialBudget {
        levels: usize,
        segments: usize,
        budget: u64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
