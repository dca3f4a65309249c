use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: String,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("ill-conditioned triangular system: diagonal {pivot:e} below threshold {threshold:e}")]
    IllConditioned { pivot: f64, threshold: f64 },

    #[error("covariance is not numerically positive semi-definite (jitter {jitter:e} exceeds {limit:e})")]
    NotPositiveDefinite { jitter: f64, limit: f64 },

    #[error("norm diverges under grid refinement: {0}")]
    Divergent(String),

    #[error("refusing allocation of {requested} values (limit {limit})")]
    MemoryGuard { requested: usize, limit: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, value: f64, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            value,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
