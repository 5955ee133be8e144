use amaze_core::error::TrainError;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("session {0} not found")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{message}")]
    Invalid { field: Option<String>, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("state file: {0}")]
    State(#[from] serde_json::Error),
    #[error("training: {0}")]
    Train(TrainError),
}

impl ServiceError {
    /// Splits a `field: message` error text into its parts.
    pub fn invalid(text: impl Into<String>) -> Self {
        let text = text.into();
        let field = text
            .split_once(": ")
            .map(|(f, _)| f)
            .filter(|f| !f.is_empty() && f.chars().all(|c| c.is_ascii_alphanumeric() || "_.[]".contains(c)))
            .map(str::to_string);
        ServiceError::Invalid { field, message: text }
    }

    fn status(&self) -> StatusCode {
        match self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::Invalid { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl From<TrainError> for ServiceError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(m) | TrainError::Decision(m) => ServiceError::invalid(m),
            TrainError::Spec(e) => ServiceError::Invalid {
                field: Some(e.field().to_string()),
                message: e.to_string(),
            },
            TrainError::NoPendingDecision => ServiceError::Conflict("no decision is pending".into()),
            other => ServiceError::Train(other),
        }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<&'a str>,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let field = match &self {
            ServiceError::Invalid { field, .. } => field.as_deref(),
            _ => None,
        };
        let body = ErrorBody {
            error: self.to_string(),
            field,
        };
        (self.status(), Json(body)).into_response()
    }
}
