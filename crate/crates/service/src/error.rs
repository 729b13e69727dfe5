use privflow_core::inference::InferenceError;
use privflow_core::kb::{DocumentError, ValidationReport};
use privflow_core::nudge::NudgeError;
use privflow_core::preference::PreferenceError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{field}: no entity matches {reference}")]
    UnknownEntityRef { field: String, reference: String },
    #[error("{what} {id} not found")]
    NotFound { what: &'static str, id: String },
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Nudge(#[from] NudgeError),
    #[error(transparent)]
    Preference(#[from] PreferenceError),
    #[error("knowledge base document: {0}")]
    Document(#[from] DocumentError),
    #[error("knowledge base is not valid:\n{0}")]
    InvalidKb(ValidationReport),
    #[error("corrupt log at line {line}: {message}")]
    CorruptLog { line: usize, message: String },
    #[error("snapshot at seq {seq} does not match replayed state")]
    SnapshotMismatch { seq: u64 },
    #[error("refusing to bind non-loopback address {0} without --allow-remote")]
    NonLoopback(std::net::SocketAddr),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl ServiceError {
    /// Whether the caller sent something wrong, as opposed to local state or IO failing.
    pub fn is_client_error(&self) -> bool {
        !matches!(
            self,
            ServiceError::Io(_) | ServiceError::CorruptLog { .. } | ServiceError::SnapshotMismatch { .. }
        )
    }
}

impl From<serde_json::Error> for ServiceError {
    fn from(e: serde_json::Error) -> Self {
        ServiceError::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, ServiceError>;
