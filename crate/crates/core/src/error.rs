use std::path::PathBuf;

use crate::optim::Algorithm;

/// Errors produced by the optimizer library and the experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("square root of negative entry {value} at index {index}")]
    NegativeEntry { index: usize, value: f64 },

    #[error("division by zero at index {index} (delta + s = 0)")]
    DivisionByZero { index: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{0:?} requires a learning rate (`lr`)")]
    MissingLearningRate(Algorithm),

    #[error("step {step} outside schedule range [0, {total})")]
    StepOutOfRange { step: u64, total: u64 },

    #[error("step size must be positive, got {0}")]
    NonPositiveStepSize(f64),

    #[error("no averaged iterate available yet (need a second observation)")]
    NoAverage,

    #[error("linear system is singular; use l2_reg > 0")]
    SingularSystem,

    #[error(
        "Newton's method did not converge in {iterations} iterations (gradient norm {grad_norm:e})"
    )]
    NewtonDiverged { iterations: usize, grad_norm: f64 },

    #[error("problem kind `{0}` has no computable minimizer")]
    NoMinimizer(&'static str),

    #[error("noise model `{noise}` is not supported for problem kind `{problem}`")]
    UnsupportedNoise {
        noise: &'static str,
        problem: &'static str,
    },

    #[error("rate fit: {0}")]
    RateFit(String),

    #[error("config key `{0}` not found")]
    UnknownKey(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
