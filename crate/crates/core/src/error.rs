use thiserror::Error;

/// Errors raised across the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid forcing: {0}")]
    Forcing(String),

    #[error("non-finite initial data: {field} at x = {x}")]
    InitialData { field: &'static str, x: f64 },

    #[error("non-finite derivative in {field} at index {index}")]
    NonFinite { field: &'static str, index: usize },

    #[error("blow-up detected at t = {t}")]
    BlowUp { t: f64 },

    #[error("time step {dt} is not commensurate with delay {tau}: use dt = tau / K for an integer K (nearest K = {suggested_k})")]
    Incommensurate { dt: f64, tau: f64, suggested_k: usize },

    #[error("parameter hypotheses violated: {0}")]
    Hypothesis(String),

    #[error("Lyapunov weights violate smallness condition: {0}")]
    LyapunovConfig(String),

    #[error("decay fit failed: {0}")]
    Fit(String),

    #[error("trajectory too short: {0} samples (need at least {1})")]
    TooShort(usize, usize),

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("scenario hash mismatch: file has {found}, expected {expected}")]
    HashMismatch { expected: String, found: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
