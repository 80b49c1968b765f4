use chrono::{DateTime, Utc};
use serde::Serialize;

use crate::tutor::provider::ProviderError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// One violated invariant, addressed by a dotted path into the submitted document
/// (`options[2].text`, `answer_key`, ...).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl FieldError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("validation failed: {}", summarize(.0))]
    Validation(Vec<FieldError>),

    #[error("{kind} {id} not found")]
    NotFound { kind: &'static str, id: String },

    #[error("question {question_id} links to unresolved question(s) {}", .missing.join(", "))]
    DanglingReference {
        question_id: String,
        missing: Vec<String>,
    },

    #[error("submitted_at {submitted_at} precedes opened_at {opened_at}")]
    Ordering {
        opened_at: DateTime<Utc>,
        submitted_at: DateTime<Utc>,
    },

    #[error("answer payload does not match question kind: {0}")]
    PayloadShape(String),

    #[error("attempt limit of {limit} reached")]
    AttemptLimitExceeded {
        limit: u32,
        explanation: Option<String>,
    },

    #[error("{0}")]
    Auth(String),

    #[error("Likert value {0} outside 1..=5")]
    Range(i64),

    #[error("respondent {respondent} is missing responses for {}", .items.join(", "))]
    MissingResponse {
        respondent: String,
        items: Vec<String>,
    },

    #[error(transparent)]
    Provider(#[from] ProviderError),

    #[error("storage: {0}")]
    Storage(String),
}

fn summarize(errors: &[FieldError]) -> String {
    errors
        .iter()
        .map(|e| format!("{}: {}", e.path, e.message))
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub fn not_found(kind: &'static str, id: impl ToString) -> Self {
        Error::NotFound {
            kind,
            id: id.to_string(),
        }
    }

    pub fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation(vec![FieldError::new(path, message)])
    }

    /// Stable machine-readable code used in API error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation_error",
            Error::NotFound { .. } => "not_found",
            Error::DanglingReference { .. } => "dangling_reference",
            Error::Ordering { .. } => "ordering_error",
            Error::PayloadShape(_) => "payload_shape_error",
            Error::AttemptLimitExceeded { .. } => "attempt_limit_exceeded",
            Error::Auth(_) => "auth_error",
            Error::Range(_) => "range_error",
            Error::MissingResponse { .. } => "missing_response",
            Error::Provider(_) => "provider_error",
            Error::Storage(_) => "storage_error",
        }
    }

    /// Structured details for the API error body, when there are any.
    pub fn details(&self) -> Option<serde_json::Value> {
        match self {
            Error::Validation(errors) => serde_json::to_value(errors).ok(),
            Error::DanglingReference {
                question_id,
                missing,
            } => Some(serde_json::json!({ "question_id": question_id, "missing": missing })),
            Error::AttemptLimitExceeded { limit, explanation } => {
                Some(serde_json::json!({ "limit": limit, "explanation": explanation }))
            }
            Error::MissingResponse { respondent, items } => {
                Some(serde_json::json!({ "respondent": respondent, "items": items }))
            }
            Error::Ordering {
                opened_at,
                submitted_at,
            } => Some(serde_json::json!({ "opened_at": opened_at, "submitted_at": submitted_at })),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Storage(err.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Storage(err.to_string())
    }
}
