use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use vera_core::calibration::CalibrationError;
use vera_core::compiler::CompileError;
use vera_core::engine::EngineError;
use vera_core::library::LibraryError;
use vera_core::ValidationReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    ValidationFailed,
    NotFound,
    BadRequest,
    EngineError,
}

impl ErrorCode {
    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::ValidationFailed => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::BadRequest => StatusCode::BAD_REQUEST,
            ErrorCode::EngineError => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

/// Body of every non-success response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default)]
    pub details: Value,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            details: Value::Null,
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::BadRequest, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::NotFound, message)
    }

    pub fn engine(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::EngineError, message)
    }

    pub fn validation(report: &ValidationReport) -> Self {
        Self {
            code: ErrorCode::ValidationFailed,
            message: report.to_string(),
            details: serde_json::to_value(report).unwrap_or(Value::Null),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.code.status(), Json(self)).into_response()
    }
}

impl From<LibraryError> for ApiError {
    fn from(e: LibraryError) -> Self {
        match &e {
            LibraryError::NotFound(_) => ApiError::not_found(e.to_string()),
            LibraryError::Invalid(report) => ApiError::validation(report),
            LibraryError::AlreadyExists(_)
            | LibraryError::BadId(_)
            | LibraryError::IdMismatch { .. }
            | LibraryError::Lineage { .. } => ApiError::bad_request(e.to_string()),
            LibraryError::Io(_) | LibraryError::Json(_) => ApiError::engine(e.to_string()),
        }
    }
}

impl From<CompileError> for ApiError {
    fn from(e: CompileError) -> Self {
        match &e {
            CompileError::Invalid(report) => ApiError::validation(report),
            _ => ApiError::new(ErrorCode::ValidationFailed, e.to_string()),
        }
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::InvalidConfig(_) => ApiError::bad_request(e.to_string()),
            _ => ApiError::engine(e.to_string()),
        }
    }
}

impl From<CalibrationError> for ApiError {
    fn from(e: CalibrationError) -> Self {
        match e {
            CalibrationError::Compile(inner) => inner.into(),
            CalibrationError::Engine(inner) => inner.into(),
            other => ApiError::bad_request(other.to_string()),
        }
    }
}
