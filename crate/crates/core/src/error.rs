use thiserror::Error;

/// Errors raised by table construction, world enumeration and the optimizers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid alphabet `{name}`: {reason}")]
    InvalidAlphabet { name: String, reason: String },

    #[error("table has {got} values but its axes span {expected} cells")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("negative probability {value} at flat index {index}")]
    NegativeProbability { index: usize, value: f64 },

    #[error("probabilities sum to {sum} (deficit {deficit:e}), tolerance is 1e-12")]
    NotNormalized { sum: f64, deficit: f64 },

    #[error("kernel row {row} sums to {sum} (deficit {deficit:e})")]
    RowNotNormalized { row: usize, sum: f64, deficit: f64 },

    #[error("non-finite value {value} at flat index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("axis mismatch: {0}")]
    AxisMismatch(String),

    #[error("unknown axis `{0}`")]
    UnknownAxis(String),

    #[error("axis sets overlap on `{0}`")]
    OverlappingAxes(String),

    #[error("conditioning on zero-probability event {0}")]
    ZeroProbabilityEvent(String),

    #[error("information value {0:e} nats is negative beyond tolerance")]
    NegativeInformation(f64),

    #[error("enumeration budget exceeded: need {required} cells, allowed {allowed}")]
    BudgetExceeded { required: u128, allowed: u128 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("support violation: {0}")]
    SupportViolation(String),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
