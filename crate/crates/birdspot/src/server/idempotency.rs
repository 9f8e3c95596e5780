//! Replay of POST responses under a client-supplied `Idempotency-Key`.
//!
//! The first request with a given key runs normally and its response is
//! stored. Retries with the same key, method, path and body get the stored
//! response back without touching engine state; reusing a key for a
//! different request is a conflict. Concurrent retries wait for the first.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::body::{to_bytes, Body, Bytes};
use axum::extract::{Request, State};
use axum::http::{HeaderMap, HeaderValue, Method, StatusCode};
use axum::middleware::Next;
use axum::response::{IntoResponse, Response};

use super::error::ApiError;

pub const HEADER: &str = "idempotency-key";
pub const REPLAYED_HEADER: &str = "idempotent-replayed";
const MAX_BODY: usize = 4 << 20;

struct Stored {
    request_body: Bytes,
    status: StatusCode,
    headers: HeaderMap,
    body: Bytes,
}

type Slot = Arc<tokio::sync::Mutex<Option<Stored>>>;

#[derive(Default)]
pub struct IdempotencyStore {
    slots: Mutex<HashMap<String, Slot>>,
}

impl IdempotencyStore {
    fn slot(&self, key: String) -> Slot {
        self.slots.lock().expect("idempotency map").entry(key).or_default().clone()
    }
}

fn replay(stored: &Stored) -> Response {
    let mut response = (stored.status, stored.body.clone()).into_response();
    *response.headers_mut() = stored.headers.clone();
    response.headers_mut().insert(REPLAYED_HEADER, HeaderValue::from_static("true"));
    response
}

pub async fn middleware(State(store): State<Arc<IdempotencyStore>>, req: Request, next: Next) -> Response {
    if req.method() != Method::POST {
        return next.run(req).await;
    }
    let Some(key) = req.headers().get(HEADER).and_then(|v| v.to_str().ok()).map(str::to_owned) else {
        return next.run(req).await;
    };
    let slot = store.slot(format!("{} {} {key}", req.method(), req.uri().path()));
    let mut guard = slot.lock().await;

    let (parts, body) = req.into_parts();
    let request_body = match to_bytes(body, MAX_BODY).await {
        Ok(b) => b,
        Err(e) => return ApiError::bad_request(format!("unreadable body: {e}")).into_response(),
    };
    if let Some(stored) = guard.as_ref() {
        if stored.request_body != request_body {
            return ApiError::conflict("idempotency key was already used for a different request").into_response();
        }
        return replay(stored);
    }

    let response = next.run(Request::from_parts(parts, Body::from(request_body.clone()))).await;
    let (parts, body) = response.into_parts();
    let body = match to_bytes(body, usize::MAX).await {
        Ok(b) => b,
        Err(e) => return ApiError::engine(format!("response body: {e}")).into_response(),
    };
    // Server errors are not remembered so a retry can still succeed.
    if !parts.status.is_server_error() {
        *guard = Some(Stored {
            request_body,
            status: parts.status,
            headers: parts.headers.clone(),
            body: body.clone(),
        });
    }
    Response::from_parts(parts, Body::from(body))
}
