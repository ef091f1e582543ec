use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use persopilot_core::EngineError;
use serde::{Deserialize, Serialize};

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error_code: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub detail: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, detail: impl Into<String>) -> Self {
        ApiError { status, code, detail: detail.into() }
    }

    pub fn bad_request(code: &'static str, detail: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, detail)
    }

    pub fn internal(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal_error", detail)
    }
}

pub fn status_for(code: &str) -> StatusCode {
    match code {
        "unknown_user" | "unknown_task" | "unknown_topic" | "unknown_classification_task" | "unknown_triple"
        | "unknown_offer" => StatusCode::NOT_FOUND,
        "user_exists" | "already_finalized" | "already_responded" | "locked_classifier" | "no_eligible_users" => {
            StatusCode::CONFLICT
        }
        "invalid_request" => StatusCode::BAD_REQUEST,
        "topic_task_mismatch" | "validation_error" | "unknown_label" => StatusCode::UNPROCESSABLE_ENTITY,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<EngineError> for ApiError {
    fn from(err: EngineError) -> Self {
        let code = err.code();
        let status = status_for(code);
        if status.is_server_error() {
            log::error!("{err}");
        }
        ApiError::new(status, code, err.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody { error_code: self.code.to_string(), detail: self.detail };
        (self.status, Json(body)).into_response()
    }
}
