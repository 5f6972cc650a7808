use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value at {location}")]
    NonFinite { location: String },

    #[error("invalid kernel spec: {0}")]
    InvalidSpec(String),

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("matrix is not positive semi-definite: minimum eigenvalue {min_eigenvalue:e} below tolerance {tolerance:e}")]
    NotPsd { min_eigenvalue: f64, tolerance: f64 },

    #[error("eigensolver did not converge after {sweeps} sweeps (residual {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("degenerate kernel: maximum diagonal value {0:e} is not positive")]
    DegenerateKernel(f64),

    #[error("sample is not closed under swaps; missing {missing:?} (add virtual examples with swapped pairs)")]
    NotSwapClosed { missing: Vec<(usize, usize)> },

    #[error("inconsistent anti-symmetric label {label} on diagonal pair ({index}, {index})")]
    InconsistentLabel { index: usize, label: f64 },

    #[error("linear solve failed (condition estimate {condition:e})")]
    SolveFailed { condition: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{context}: {source}")]
    Context { context: String, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context { context: context.into(), source: Box::new(self) }
    }

    /// Innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}
