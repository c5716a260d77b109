use thiserror::Error;

use crate::grid::RealField;

pub type Result<T> = std::result::Result<T, ZkError>;

#[derive(Debug, Error)]
pub enum ZkError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    Shape {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("domain error: {0}")]
    Domain(String),

    /// Raised by the integrator. Carries the last finite state when one exists.
    #[error("numerical divergence at step {step} (t = {t})")]
    Divergence {
        step: usize,
        t: f64,
        last_good: Option<Box<(f64, RealField)>>,
    },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("missing required keys: {}", .0.join(", "))]
    MissingKeys(Vec<String>),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl ZkError {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            ZkError::Divergence { .. } => 3,
            ZkError::Io(_) | ZkError::Format(_) => 4,
            _ => 2,
        }
    }
}
