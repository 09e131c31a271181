use accessgraph::Error as CoreError;
use serde::Serialize;
use thiserror::Error;

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{kind} `{id}` not found")]
    NotFound { kind: &'static str, id: String },

    #[error("{0}")]
    Conflict(String),

    #[error("{0}")]
    BadRequest(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("store I/O failed: {0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Internal(String),
}

/// JSON error body shared by the CLI and the HTTP API.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<[f64; 3]>,
}

impl ServiceError {
    pub fn not_found(kind: &'static str, id: impl Into<String>) -> Self {
        ServiceError::NotFound { kind, id: id.into() }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ServiceError::NotFound { .. } => "NotFound",
            ServiceError::Conflict(_) => "Conflict",
            ServiceError::BadRequest(_) => "BadRequest",
            ServiceError::Core(e) => e.kind(),
            ServiceError::Io(_) => "Io",
            ServiceError::Internal(_) => "Internal",
        }
    }

    /// HTTP status for this error.
    pub fn status(&self) -> u16 {
        match self {
            ServiceError::NotFound { .. } => 404,
            ServiceError::Conflict(_) => 409,
            ServiceError::BadRequest(_) => 400,
            ServiceError::Core(e) => match e {
                CoreError::InvalidStart { .. }
                | CoreError::NonPositiveEdgeCost { .. }
                | CoreError::ChildlessVertex(_)
                | CoreError::EmptyWalkableSet => 422,
                CoreError::UnknownKey(_) | CoreError::UnknownVertex(_) => 404,
                CoreError::Io(_) => 500,
                _ => 400,
            },
            ServiceError::Io(_) | ServiceError::Internal(_) => 500,
        }
    }

    /// CLI exit code: 1 for user errors, 2 for internal failures.
    pub fn exit_code(&self) -> u8 {
        if self.status() >= 500 {
            2
        } else {
            1
        }
    }

    pub fn body(&self) -> ErrorBody {
        let tau = match self {
            ServiceError::Core(CoreError::InvalidStart { tau }) => Some([tau.x, tau.y, tau.z]),
            _ => None,
        };
        ErrorBody {
            error: self.kind().to_string(),
            message: self.to_string(),
            tau,
        }
    }
}

impl From<serde_json::Error> for ServiceError {
    fn from(e: serde_json::Error) -> Self {
        ServiceError::BadRequest(e.to_string())
    }
}
