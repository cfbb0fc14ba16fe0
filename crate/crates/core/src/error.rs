use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: N={left_n}, L={left_l} vs N={right_n}, L={right_l}")]
    GridMismatch {
        left_n: usize,
        left_l: f64,
        right_n: usize,
        right_l: f64,
    },

    #[error("non-finite value {value} at flat index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("input must have zero mean, got mean {mean:e} (tolerance {tolerance:e})")]
    NotMeanZero { mean: f64, tolerance: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("unsupported Sobolev index {0} (supported: -1..=8)")]
    SobolevIndex(i32),

    #[error("Newton iteration did not converge after {iterations} iterations (residuals: {residuals:?})")]
    NewtonNotConverged { iterations: usize, residuals: Vec<f64> },

    #[error("Newton iteration diverged: residual grew for 3 consecutive iterations (residuals: {residuals:?})")]
    NewtonDiverged { residuals: Vec<f64> },

    #[error("step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("field file error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
