use thiserror::Error;

use crate::optim::OptimTrace;

pub type Result<T, E = DdmError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DdmError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid deformation graph: {0}")]
    InvalidGraph(String),

    /// Non-finite objective or gradient during optimization. Carries the
    /// trace recorded up to (and including) the offending iteration.
    #[error("numerical abort at iteration {iteration}: {reason}")]
    NumericalAbort {
        iteration: usize,
        reason: String,
        trace: Box<OptimTrace>,
    },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl DdmError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        DdmError::InvalidInput(msg.into())
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        DdmError::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}
