use std::path::PathBuf;

/// Errors raised anywhere in the solver stack.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A model, grid, or parameter failed validation. `field` is a dotted path.
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },

    #[error("time grid mismatch: expected N = {expected} intervals over T = {horizon}, got {found}")]
    GridMismatch {
        expected: usize,
        horizon: f64,
        found: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    /// The per-step scalar update failed to settle; usually alpha is too small for the step size.
    #[error("implicit control update did not converge on interval {interval} (last change {change:e})")]
    ImplicitUpdate { interval: usize, change: f64 },

    #[error("iteration {iteration}: {what} became non-finite")]
    Diverged { iteration: usize, what: &'static str },

    #[error("eigensolver failed: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: String, message: String },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
