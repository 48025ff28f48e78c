use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range for {len} subsystems")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("operands live on different composite spaces")]
    SpaceMismatch,

    #[error("space layout does not match model parameters: {0}")]
    LayoutMismatch(String),

    #[error("state has support outside the zero/one-excitation subspace (weight {weight:.3e})")]
    OutsideSubspace { weight: f64 },

    #[error("step size underflow at t = {t:.6e} s (state norm {norm:.6e})")]
    StepSizeUnderflow { t: f64, norm: f64 },

    #[error("step budget of {max_steps} exhausted at t = {t:.6e} s")]
    StepBudgetExhausted { t: f64, max_steps: usize },

    #[error("density-matrix invariant violated at t = {t:.6e} s: {what}")]
    InvariantViolation { t: f64, what: String },

    #[error("unknown figure recipe `{0}`")]
    UnknownRecipe(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
