use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("assumption {which} violated: {witness}")]
    Assumption { which: &'static str, witness: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{what} did not converge after {iterations} iterations (last change {last:.3e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("speed {c} is subcritical (c* = {c_star})")]
    Subcritical { c: f64, c_star: f64 },

    #[error("speed {c} is within the critical band of c* = {c_star}; use the critical pipeline")]
    CriticalSpeed { c: f64, c_star: f64 },

    #[error("extinct: no wave pipeline (principal eigenvalue {lambda} is nonnegative)")]
    Extinct { lambda: f64 },

    #[error("domain too short: a = {a} < a* = {a_star}")]
    DomainTooShort { a: f64, a_star: f64 },

    #[error("envelope tuning failed: {0}")]
    EnvelopeTuning(String),

    #[error("domain exhausted at t = {t}: front reached the guard band")]
    DomainExhausted { t: f64 },

    #[error("bound violated at t = {t}: value {value} outside [0, {bound}]")]
    BoundViolation { t: f64, value: f64, bound: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
