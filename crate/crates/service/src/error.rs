use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use fineval_core::{Error, IngestError};
use serde_json::json;

pub type ServiceResult<T> = std::result::Result<T, ServiceError>;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("validation failed: {0}")]
    ValidationFailed(IngestError),
    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),
    #[error("unknown system {0:?}")]
    UnknownSystem(String),
    #[error("dataset {0:?} already exists")]
    DatasetExists(String),
    #[error("invalid dataset id {0:?}")]
    InvalidId(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("storage error: {0}")]
    Io(String),
}

impl From<IngestError> for ServiceError {
    fn from(e: IngestError) -> Self {
        ServiceError::Core(e.into())
    }
}

impl ServiceError {
    /// Parse errors in a submission become `ValidationFailed`.
    pub fn validation(e: Error) -> Self {
        match e {
            Error::Ingest(inner) => ServiceError::ValidationFailed(inner),
            other => ServiceError::Core(other),
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::Core(e) => e.code(),
            ServiceError::ValidationFailed(_) => "ValidationFailed",
            ServiceError::UnknownDataset(_) => "UnknownDataset",
            ServiceError::UnknownSystem(_) => "UnknownSystem",
            ServiceError::DatasetExists(_) => "DatasetExists",
            ServiceError::InvalidId(_) => "InvalidId",
            ServiceError::BadRequest(_) => "BadRequest",
            ServiceError::Io(_) => "StorageError",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::UnknownDataset(_) | ServiceError::UnknownSystem(_) => StatusCode::NOT_FOUND,
            ServiceError::DatasetExists(_) => StatusCode::CONFLICT,
            ServiceError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut body = json!({ "code": self.code(), "message": self.to_string() });
        let ingest = match self {
            ServiceError::ValidationFailed(e) | ServiceError::Core(Error::Ingest(e)) => Some(e),
            _ => None,
        };
        if let Some(e) = ingest {
            body["cause"] = json!(e.code());
            if let Some(line) = e.line() {
                body["line"] = json!(line);
            }
        }
        json!({ "error": body })
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status(), axum::Json(self.to_json())).into_response()
    }
}
