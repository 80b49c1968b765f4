use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use pappl_core::tutor::ProviderError;
use pappl_core::Error;
use serde::Serialize;

/// `{error_code, message, details}` with a matching HTTP status.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub details: Option<serde_json::Value>,
}

#[derive(Serialize)]
struct Body<'a> {
    error_code: &'a str,
    message: &'a str,
    details: &'a Option<serde_json::Value>,
}

impl ApiError {
    pub fn forbidden(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::FORBIDDEN,
            code: "auth_error",
            message: message.into(),
            details: None,
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            code: "validation_error",
            message: message.into(),
            details: None,
        }
    }
}

fn status_for(err: &Error) -> StatusCode {
    match err {
        Error::Validation(_)
        | Error::Ordering { .. }
        | Error::PayloadShape(_)
        | Error::Range(_)
        | Error::MissingResponse { .. } => StatusCode::UNPROCESSABLE_ENTITY,
        Error::NotFound { .. } => StatusCode::NOT_FOUND,
        Error::DanglingReference { .. } | Error::AttemptLimitExceeded { .. } => {
            StatusCode::CONFLICT
        }
        Error::Auth(_) => StatusCode::UNAUTHORIZED,
        Error::Provider(ProviderError::Timeout(_)) => StatusCode::GATEWAY_TIMEOUT,
        Error::Provider(_) => StatusCode::BAD_GATEWAY,
        Error::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        if let Error::Storage(msg) = &err {
            tracing::error!(error = %msg, "storage failure");
        }
        Self {
            status: status_for(&err),
            code: err.code(),
            message: err.to_string(),
            details: err.details(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Body {
            error_code: self.code,
            message: &self.message,
            details: &self.details,
        };
        (self.status, Json(body)).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
