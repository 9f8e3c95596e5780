use axum::extract::{FromRequest, Request};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use birdspot_core::game::GameError;
use birdspot_core::suggester::SuggestError;
use birdspot_core::verifier::VerifyError;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    NotFound,
    Conflict,
    EngineError,
}

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip, default = "default_status")]
    pub status: StatusCode,
    pub code: ErrorCode,
    pub message: String,
    pub detail: Option<Value>,
}

fn default_status() -> StatusCode {
    StatusCode::INTERNAL_SERVER_ERROR
}

impl ApiError {
    pub fn new(status: StatusCode, code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            detail: None,
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, ErrorCode::BadRequest, message)
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, ErrorCode::NotFound, format!("unknown {what} `{id}`"))
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, ErrorCode::Conflict, message)
    }

    pub fn engine(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, ErrorCode::EngineError, message)
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(code = ?self.code, "{}", self.message);
        }
        (self.status, Json(&self)).into_response()
    }
}

impl From<GameError> for ApiError {
    fn from(e: GameError) -> Self {
        match e {
            GameError::UnknownHike(id) => Self::not_found("hike", &id),
            GameError::HikeFinished(_) | GameError::DuplicateHike(_) | GameError::NotVerified(_) => {
                Self::conflict(e.to_string())
            }
            GameError::NonMonotonicTime => Self::conflict(e.to_string()),
            GameError::Geo(_) => Self::bad_request(e.to_string()),
        }
    }
}

impl From<VerifyError> for ApiError {
    fn from(e: VerifyError) -> Self {
        match &e {
            VerifyError::SessionClosed(status) => {
                Self::conflict(e.to_string()).with_detail(serde_json::json!({ "status": status }))
            }
            VerifyError::WrongAttribute { expected, .. } => {
                Self::conflict(e.to_string()).with_detail(serde_json::json!({ "expected": expected }))
            }
            VerifyError::UnknownSpecies(_) | VerifyError::LengthMismatch { .. } | VerifyError::BadPrior => {
                Self::bad_request(e.to_string())
            }
            VerifyError::InvalidMatrix(_) | VerifyError::InvalidConfig(_) => Self::engine(e.to_string()),
        }
    }
}

impl From<SuggestError> for ApiError {
    fn from(e: SuggestError) -> Self {
        match &e {
            SuggestError::NotEnoughData { found, required } => Self::bad_request(e.to_string())
                .with_detail(serde_json::json!({ "found": found, "required": required })),
            SuggestError::InvalidLevel => Self::bad_request(e.to_string()),
            _ => Self::engine(e.to_string()),
        }
    }
}

impl From<crate::error::Error> for ApiError {
    fn from(e: crate::error::Error) -> Self {
        use crate::error::Error;
        match e {
            Error::Game(g) => g.into(),
            Error::Verify(v) => v.into(),
            Error::Suggest(s) => s.into(),
            Error::Geo(g) => Self::bad_request(g.to_string()),
            other => Self::engine(other.to_string()),
        }
    }
}

/// `Json` whose rejection is an [`ApiError`].
pub struct ApiJson<T>(pub T);

impl<S, T> FromRequest<S> for ApiJson<T>
where
    S: Send + Sync,
    T: DeserializeOwned,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(value)) => Ok(Self(value)),
            Err(rejection) => Err(ApiError::bad_request(rejection.body_text())),
        }
    }
}
