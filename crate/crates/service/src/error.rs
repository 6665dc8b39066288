use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use forestplay_core::game::{ConfigError, PlayerId, ReplayError, RuleError};
use serde_json::json;
use thiserror::Error;

use crate::canonical_response;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("no session {0}")]
    UnknownSession(String),
    #[error("all seats are taken")]
    SessionFull,
    #[error("missing or unknown seat token")]
    Unauthorized,
    #[error("token is for {token_seat}, action is for {actor}")]
    WrongSeat { token_seat: PlayerId, actor: PlayerId },
    #[error("session is not accepting actions")]
    NotActive,
    #[error("game is not finished")]
    NotFinished,
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error("invalid request: {0}")]
    BadRequest(String),
    #[error("invalid config: {0}")]
    Config(#[from] ConfigError),
    #[error("stored session is unreadable: {0}")]
    Restore(#[from] ReplayError),
    #[error("storage failure: {0}")]
    Storage(#[from] std::io::Error),
    #[error("session worker stopped")]
    Gone,
}

impl ApiError {
    pub fn code(&self) -> &'static str {
        match self {
            ApiError::UnknownSession(_) => "unknown_session",
            ApiError::SessionFull => "session_full",
            ApiError::Unauthorized => "unauthorized",
            ApiError::WrongSeat { .. } => "wrong_seat",
            ApiError::NotActive => "not_active",
            ApiError::NotFinished => "not_finished",
            ApiError::Rule(e) => e.code(),
            ApiError::BadRequest(_) => "bad_request",
            ApiError::Config(_) => "invalid_config",
            ApiError::Restore(_) => "restore_failed",
            ApiError::Storage(_) => "storage",
            ApiError::Gone => "gone",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::UnknownSession(_) => StatusCode::NOT_FOUND,
            ApiError::SessionFull | ApiError::NotActive | ApiError::NotFinished => StatusCode::CONFLICT,
            ApiError::Unauthorized => StatusCode::UNAUTHORIZED,
            ApiError::WrongSeat { .. } => StatusCode::FORBIDDEN,
            ApiError::Rule(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::BadRequest(_) | ApiError::Config(_) => StatusCode::BAD_REQUEST,
            ApiError::Restore(_) | ApiError::Storage(_) | ApiError::Gone => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({"error": self.code(), "message": self.to_string()});
        if let ApiError::Rule(rule) = &self {
            body["rule"] = serde_json::to_value(rule).unwrap_or_default();
        }
        canonical_response(self.status(), &body)
    }
}
