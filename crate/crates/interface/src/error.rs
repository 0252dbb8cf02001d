use std::fmt;

use unibias_core::Error as CoreError;

/// Broad failure class; decides the CLI exit code and the HTTP status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Validation,
    Io,
    NotFound,
    TooLarge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppError {
    pub kind: Kind,
    pub code: String,
    pub detail: String,
}

impl AppError {
    pub fn validation(code: &str, detail: impl Into<String>) -> Self {
        AppError { kind: Kind::Validation, code: code.into(), detail: detail.into() }
    }

    pub fn io(detail: impl Into<String>) -> Self {
        AppError { kind: Kind::Io, code: "io_failure".into(), detail: detail.into() }
    }

    pub fn not_found(detail: impl Into<String>) -> Self {
        AppError { kind: Kind::NotFound, code: "unknown_session".into(), detail: detail.into() }
    }

    pub fn too_large(detail: impl Into<String>) -> Self {
        AppError { kind: Kind::TooLarge, code: "payload_too_large".into(), detail: detail.into() }
    }

    /// 0 is success; validation problems exit 2, environment problems 1.
    pub fn exit_code(&self) -> i32 {
        match self.kind {
            Kind::Io => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.detail)
    }
}

impl std::error::Error for AppError {}

impl From<CoreError> for AppError {
    fn from(e: CoreError) -> Self {
        let kind = if e.is_io() { Kind::Io } else { Kind::Validation };
        AppError { kind, code: e.code().into(), detail: e.to_string() }
    }
}

impl From<serde_json::Error> for AppError {
    fn from(e: serde_json::Error) -> Self {
        AppError::validation("invalid_json", e.to_string())
    }
}

pub type AppResult<T> = Result<T, AppError>;
