use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use consentcore::broker::BrokerError;
use serde::Serialize;
use serde_json::{json, Value};

/// Schema version carried by every body and stream event.
pub const WIRE_VERSION: u32 = 1;

pub const REQUEST_ID_HEADER: &str = "x-request-id";

/// A failed API call: HTTP status plus the stable error code.
#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub details: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            details: None,
        }
    }

    pub fn malformed(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "MALFORMED_REQUEST", message)
    }

    pub fn not_found(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, message)
    }
}

impl From<BrokerError> for ApiError {
    fn from(err: BrokerError) -> Self {
        let status = match &err {
            BrokerError::UnknownApp(_) | BrokerError::UnknownPrompt(_) => StatusCode::NOT_FOUND,
            BrokerError::DuplicateApp(_)
            | BrokerError::AlreadyDecided(_)
            | BrokerError::PromptExpired(_)
            | BrokerError::NoGrant { .. }
            | BrokerError::RegistryConflict { .. } => StatusCode::CONFLICT,
            BrokerError::ValidationFailed(_) => StatusCode::UNPROCESSABLE_ENTITY,
            BrokerError::UnknownPermission(_) | BrokerError::UndeclaredPermission(_) => {
                StatusCode::BAD_REQUEST
            }
            BrokerError::QueueClosed => StatusCode::SERVICE_UNAVAILABLE,
            BrokerError::JournalIo { .. } | BrokerError::JournalCorrupt { .. } => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        let details = match &err {
            BrokerError::ValidationFailed(failures) => Some(json!({ "failures": failures })),
            _ => None,
        };
        Self {
            status,
            code: err.code(),
            message: err.to_string(),
            details,
        }
    }
}

/// Successful body, still to be wrapped with its request id.
pub struct Reply {
    status: StatusCode,
    payload: Value,
}

impl Reply {
    pub fn ok(payload: impl Serialize) -> Result<Self, ApiError> {
        Self::with_status(StatusCode::OK, payload)
    }

    pub fn created(payload: impl Serialize) -> Result<Self, ApiError> {
        Self::with_status(StatusCode::CREATED, payload)
    }

    fn with_status(status: StatusCode, payload: impl Serialize) -> Result<Self, ApiError> {
        let payload = serde_json::to_value(payload).map_err(|e| {
            ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "ENCODE_FAILED", e.to_string())
        })?;
        Ok(Self { status, payload })
    }
}

/// Wraps a handler outcome in `{v, requestId, payload | error}`.
pub fn respond(request_id: &str, outcome: Result<Reply, ApiError>) -> Response {
    let (status, body) = match outcome {
        Ok(reply) => (
            reply.status,
            json!({ "v": WIRE_VERSION, "requestId": request_id, "payload": reply.payload }),
        ),
        Err(err) => {
            if err.status.is_server_error() {
                log::error!("{request_id}: {} {}", err.code, err.message);
            } else {
                log::debug!("{request_id}: {} {}", err.code, err.message);
            }
            let mut error = json!({ "code": err.code, "message": err.message });
            if let Some(details) = err.details {
                error["details"] = details;
            }
            (
                err.status,
                json!({ "v": WIRE_VERSION, "requestId": request_id, "error": error }),
            )
        }
    };
    let mut response = (status, Json(body)).into_response();
    if let Ok(value) = HeaderValue::from_str(request_id) {
        response.headers_mut().insert(REQUEST_ID_HEADER, value);
    }
    response
}
