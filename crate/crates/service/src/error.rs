use std::path::Path;

use thiserror::Error;

use crate::config::ConfigError;
use crate::ops::OpError;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error("{0}")]
    Conflict(String),
    #[error("the project index is not ready; build it first")]
    IndexNotReady,
    #[error("a newer suggestion request for this comment replaced this one")]
    Superseded,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        ServiceError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::NotFound(_) => "not_found",
            ServiceError::Validation(_) => "validation",
            ServiceError::Unprocessable(_) => "unprocessable",
            ServiceError::Conflict(_) => "conflict",
            ServiceError::IndexNotReady => "index_not_ready",
            ServiceError::Superseded => "superseded",
            ServiceError::Config(_) => "config",
            ServiceError::Io { .. } | ServiceError::Internal(_) => "internal",
        }
    }
}

impl From<OpError> for ServiceError {
    fn from(e: OpError) -> Self {
        if e.is_validation() {
            ServiceError::Validation(e.to_string())
        } else {
            ServiceError::Internal(e.to_string())
        }
    }
}
