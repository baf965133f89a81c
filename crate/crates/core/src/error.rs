use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("unsupported dimension {0} (expected 1, 2 or 3)")]
    UnsupportedDimension(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("divergent coefficient tail: {0}")]
    DivergentTail(String),

    #[error("singular Wirtinger derivative at u = 0 for degree alpha = {alpha}")]
    WirtingerSingularity { alpha: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("grid budget exceeded: {points} points > {budget}")]
    GridBudget { points: usize, budget: usize },

    #[error("grid mismatch between fields")]
    GridMismatch,

    #[error("linear solve failed for {label}: {reason} (condition estimate {cond:.3e})")]
    SolveFailure {
        label: String,
        reason: String,
        cond: f64,
    },

    #[error("basis truncation loss {loss:.3e} exceeds {tol:.3e} of input norm")]
    TruncationLoss { loss: f64, tol: f64 },

    #[error("blow-up detected at t = {t_last}: {reason}")]
    BlowUp { t_last: f64, reason: String },

    #[error("fixed-point iteration is not contracting (increment ratio {ratio:.3} over {count} iterations)")]
    NotContracting { ratio: f64, count: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
