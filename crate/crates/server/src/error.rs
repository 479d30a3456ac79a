use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use covradar_core::AnalysisError;
use serde::Serialize;

/// Error body shared by every endpoint: `{"error": code, "detail": text}`.
#[derive(Debug, Clone, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub error: &'static str,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub errors: Option<Vec<String>>,
}

impl ApiError {
    pub fn new(status: StatusCode, error: &'static str, detail: impl Into<String>) -> Self {
        ApiError {
            status,
            error,
            detail: detail.into(),
            errors: None,
        }
    }

    pub fn bad_window(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_window", detail)
    }

    pub fn no_snapshot() -> Self {
        Self::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "no_snapshot",
            "no dataset loaded",
        )
    }
}

impl From<AnalysisError> for ApiError {
    fn from(e: AnalysisError) -> Self {
        match &e {
            AnalysisError::UnknownCity(_) => {
                ApiError::new(StatusCode::NOT_FOUND, "unknown_city", e.to_string())
            }
            AnalysisError::BadWindow(_) => ApiError::bad_window(e.to_string()),
            AnalysisError::Internal(_) => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self)).into_response()
    }
}
