use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use emagent_core::agent::AgentError;
use emagent_core::inventory::InventoryError;
use emagent_core::tools::QueryRejection;

/// Startup failures: bad configuration or unreadable data files.
#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("loading {what}: {message}")]
    Load { what: &'static str, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    NotFound,
    ProviderUnavailable,
    AnalysisFailed,
    Internal,
}

impl ErrorCode {
    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::BadRequest => StatusCode::BAD_REQUEST,
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::ProviderUnavailable => StatusCode::SERVICE_UNAVAILABLE,
            ErrorCode::AnalysisFailed => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

/// JSON error body returned by every endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self { code, message: message.into(), details: None }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::BadRequest, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::NotFound, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Internal, message)
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = Some(details);
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.code.status(), Json(self)).into_response()
    }
}

impl From<AgentError> for ApiError {
    fn from(e: AgentError) -> Self {
        let message = e.to_string();
        match e {
            AgentError::EmptyText => ApiError::bad_request(message),
            AgentError::AnswerUnavailable(_) | AgentError::ProviderUnavailable(_) => {
                ApiError::new(ErrorCode::ProviderUnavailable, message)
            }
            AgentError::AnalysisFailed { last_error, trace } => ApiError::new(ErrorCode::AnalysisFailed, message)
                .with_details(json!({ "last_error": last_error, "function_trace": trace })),
            _ => ApiError::internal(message),
        }
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        match r {
            QueryRejection::Violations(violations) => {
                ApiError::bad_request("request body violates the query schema")
                    .with_details(json!({ "violations": violations }))
            }
            QueryRejection::Inventory(e) => inventory_error(e),
        }
    }
}

pub fn inventory_error(e: InventoryError) -> ApiError {
    let kind = match &e {
        InventoryError::ConflictingFilters => "conflicting_filters",
        InventoryError::InvalidRange(..) => "invalid_range",
        InventoryError::KindMismatch(_) => "kind_mismatch",
        InventoryError::Schema { .. } | InventoryError::Io(_) => return ApiError::internal(e.to_string()),
    };
    ApiError::bad_request(e.to_string()).with_details(json!({ "error": kind }))
}
