use thiserror::Error;

use contextual_games::analysis::AnalysisError;
use contextual_games::game::{ProtocolError, TraceError};
use contextual_games::kernels::KernelError;
use contextual_games::routing::RoutingError;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Invalid configuration; `path` names the offending field.
    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("{0}")]
    Other(String),
}

impl HarnessError {
    pub fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        HarnessError::Config {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code: 2 for configuration errors, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
