//! HTTP binding of [`SessionManager`].
//!
//! | method | path | body |
//! |---|---|---|
//! | POST | `/sessions` | [`CreateRequest`] |
//! | GET | `/sessions/{id}` | |
//! | PATCH | `/sessions/{id}/topology` | `{"schema_version":1,"edit":{...}}` |
//! | POST | `/sessions/{id}/control` | `{"schema_version":1,"action":"start"}` |
//! | GET | `/sessions/{id}/metrics` | newline-delimited [`MetricsFrame`] stream |
//! | POST | `/sessions/{id}/dataset` | CSV text |
//! | GET | `/sessions/{id}/export` | |
//! | POST | `/import` | [`ExperimentRecord`] |
//!
//! Errors are `{"error": code, "message": text}` with a matching status.

use std::convert::Infallible;

use axum::body::{Body, Bytes};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use capmeter_core::Edit;
use futures::StreamExt;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;
use tokio::sync::broadcast::error::RecvError;

use super::{Control, CreateRequest, SessionManager};
use crate::error::Error;
use crate::experiment::{check_schema, ExperimentRecord, MetricsFrame};

pub fn router(manager: SessionManager) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(describe))
        .route("/sessions/{id}/topology", patch(patch_topology))
        .route("/sessions/{id}/control", post(control))
        .route("/sessions/{id}/metrics", get(metrics))
        .route("/sessions/{id}/dataset", post(upload))
        .route("/sessions/{id}/export", get(export))
        .route("/import", post(import))
        .with_state(manager)
}

pub struct ApiError(Error);

impl<E: Into<Error>> From<E> for ApiError {
    fn from(e: E) -> Self {
        Self(e.into())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code) = match &self.0 {
            Error::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            Error::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
            Error::SessionLimit(_) => (StatusCode::SERVICE_UNAVAILABLE, "session_limit"),
            Error::SchemaVersion { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "schema_version"),
            Error::Csv { .. } | Error::CsvFormat(_) => (StatusCode::UNPROCESSABLE_ENTITY, "csv"),
            Error::Core(capmeter_core::Error::Divergence { .. }) => (StatusCode::UNPROCESSABLE_ENTITY, "divergence"),
            Error::Core(_) | Error::Validation(_) | Error::Json(_) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "validation")
            }
            Error::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        (status, Json(json!({ "error": code, "message": self.0.to_string() }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Parses a JSON body after checking its `schema_version`.
fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, Error> {
    let value: serde_json::Value = serde_json::from_slice(body)?;
    check_schema(&value)?;
    Ok(serde_json::from_value(value)?)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, Error> + Send + 'static) -> ApiResult<T> {
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => Ok(r?),
        Err(e) => Err(Error::Io(std::io::Error::other(e)).into()),
    }
}

async fn create(State(m): State<SessionManager>, body: Bytes) -> ApiResult<Response> {
    let request: CreateRequest = parse_body(&body)?;
    let d = blocking(move || m.create(request)).await?;
    Ok((StatusCode::CREATED, Json(d)).into_response())
}

async fn describe(State(m): State<SessionManager>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(blocking(move || m.get(&id)).await?).into_response())
}

#[derive(Deserialize)]
struct PatchBody {
    edit: Edit,
}

async fn patch_topology(State(m): State<SessionManager>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let PatchBody { edit } = parse_body(&body)?;
    Ok(Json(blocking(move || m.patch_topology(&id, &edit)).await?).into_response())
}

async fn control(State(m): State<SessionManager>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let action: Control = parse_body(&body)?;
    Ok(Json(blocking(move || m.control(&id, &action)).await?).into_response())
}

async fn upload(State(m): State<SessionManager>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    Ok(Json(blocking(move || m.upload_dataset(&id, &body)).await?).into_response())
}

async fn export(State(m): State<SessionManager>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(blocking(move || m.export(&id)).await?).into_response())
}

async fn import(State(m): State<SessionManager>, body: Bytes) -> ApiResult<Response> {
    let record = ExperimentRecord::from_json(&body)?;
    let d = blocking(move || m.import(&record)).await?;
    Ok((StatusCode::CREATED, Json(d)).into_response())
}

fn line(frame: &MetricsFrame) -> Bytes {
    let mut v = serde_json::to_vec(frame).expect("frames serialize");
    v.push(b'\n');
    Bytes::from(v)
}

/// Latest frame first, then every published frame until the client leaves.
async fn metrics(State(m): State<SessionManager>, Path(id): Path<String>) -> ApiResult<Response> {
    let (latest, rx) = m.subscribe(&id)?;
    let live = futures::stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(f) => return Some((Ok::<_, Infallible>(line(&f)), rx)),
                // a slow reader skips frames; order is unaffected
                Err(RecvError::Lagged(_)) => continue,
                Err(RecvError::Closed) => return None,
            }
        }
    });
    let stream = futures::stream::once(async move { Ok(line(&latest)) }).chain(live);
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], Body::from_stream(stream)).into_response())
}
