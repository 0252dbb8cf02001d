//! JSON-over-HTTP service. Sessions hold summaries only; realization takes
//! its candidate rows in the request body.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::{BytesRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::de::DeserializeOwned;
use unibias_core::summarize;

use crate::error::{AppError, AppResult, Kind};
use crate::payload::{self, GridRequest, MitigateRequest, RealizeRequest, ReportQuery, UploadRequest};
use crate::session::{Session, SessionStore};

#[derive(Debug, Clone)]
pub struct Config {
    /// Largest accepted request body, in bytes.
    pub upload_cap: usize,
    /// Sessions kept before the least recently used is dropped.
    pub sessions: usize,
    pub default_tau: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            upload_cap: 64 * 1024 * 1024,
            sessions: 64,
            default_tau: payload::DEFAULT_TAU,
        }
    }
}

#[derive(Debug)]
pub struct AppState {
    pub config: Config,
    pub store: SessionStore,
}

type Shared = State<Arc<AppState>>;

/// A rendered JSON body with its status and optional cache marker.
pub struct JsonBody {
    status: StatusCode,
    body: String,
    cache: Option<&'static str>,
}

impl JsonBody {
    fn ok(body: String) -> Self {
        JsonBody { status: StatusCode::OK, body, cache: None }
    }
}

impl IntoResponse for JsonBody {
    fn into_response(self) -> Response {
        let mut resp = (self.status, [(header::CONTENT_TYPE, "application/json")], self.body).into_response();
        if let Some(c) = self.cache {
            resp.headers_mut().insert("x-cache", HeaderValue::from_static(c));
        }
        resp
    }
}

impl IntoResponse for AppError {
    fn into_response(self) -> Response {
        let status = match self.kind {
            Kind::Validation => StatusCode::BAD_REQUEST,
            Kind::NotFound => StatusCode::NOT_FOUND,
            Kind::TooLarge => StatusCode::PAYLOAD_TOO_LARGE,
            Kind::Io => StatusCode::INTERNAL_SERVER_ERROR,
        };
        JsonBody { status, body: payload::error_payload(&self), cache: None }.into_response()
    }
}

pub fn router(config: Config) -> Router {
    let cap = config.upload_cap;
    let state = Arc::new(AppState {
        store: SessionStore::new(config.sessions),
        config,
    });
    Router::new()
        .route("/datasets", post(upload))
        .route("/datasets/{id}", get(dataset))
        .route("/datasets/{id}/report", get(report))
        .route("/datasets/{id}/mitigate", post(mitigate))
        .route("/datasets/{id}/grid", post(grid))
        .route("/datasets/{id}/realize", post(realize))
        .fallback(|| async { AppError { kind: Kind::NotFound, code: "not_found".into(), detail: "no such route".into() } })
        .layer(DefaultBodyLimit::max(cap))
        .with_state(state)
}

fn parse_body<T: DeserializeOwned>(body: Result<Bytes, BytesRejection>) -> AppResult<(T, Bytes)> {
    let bytes = body.map_err(|r| {
        if r.status() == StatusCode::PAYLOAD_TOO_LARGE {
            AppError::too_large(r.body_text())
        } else {
            AppError::validation("invalid_body", r.body_text())
        }
    })?;
    let value = serde_json::from_slice(&bytes)?;
    Ok((value, bytes))
}

fn session(state: &AppState, id: &str) -> AppResult<Arc<Session>> {
    state
        .store
        .get(id)
        .ok_or_else(|| AppError::not_found(format!("no dataset session `{id}`")))
}

/// Runs CPU-bound work off the async workers.
async fn blocking<T, F>(f: F) -> AppResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> AppResult<T> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| AppError::io(format!("worker failed: {e}")))?
}

async fn upload(State(state): Shared, body: Result<Bytes, BytesRejection>) -> AppResult<JsonBody> {
    let (req, _) = parse_body::<UploadRequest>(body)?;
    let st = Arc::clone(&state);
    blocking(move || {
        let outcome = payload::load(req.csv.as_bytes(), &req.schema, req.delimiter.as_deref(), req.lenient)?;
        let summary = summarize(&outcome.dataset);
        let session = st.store.insert(summary);
        let body = payload::render(&payload::dataset_payload(Some(&session.id), &session.summary, &outcome.excluded));
        Ok(JsonBody { status: StatusCode::CREATED, body, cache: None })
    })
    .await
}

async fn dataset(State(state): Shared, Path(id): Path<String>) -> AppResult<JsonBody> {
    let s = session(&state, &id)?;
    Ok(JsonBody::ok(payload::render(&payload::dataset_payload(Some(&s.id), &s.summary, &[]))))
}

async fn report(
    State(state): Shared,
    Path(id): Path<String>,
    query: Result<Query<ReportQuery>, QueryRejection>,
) -> AppResult<JsonBody> {
    let Query(query) = query.map_err(|r| AppError::validation("invalid_query", r.body_text()))?;
    let s = session(&state, &id)?;
    let tau = state.config.default_tau;
    blocking(move || Ok(JsonBody::ok(payload::render(&payload::report_payload(&s.summary, &query, tau)?)))).await
}

async fn mitigate(
    State(state): Shared,
    Path(id): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> AppResult<JsonBody> {
    let s = session(&state, &id)?;
    let (req, _) = parse_body::<MitigateRequest>(body)?;
    let tau = state.config.default_tau;
    blocking(move || Ok(JsonBody::ok(payload::render(&payload::mitigate_payload(&s.summary, &req, tau)?)))).await
}

async fn grid(
    State(state): Shared,
    Path(id): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> AppResult<JsonBody> {
    let s = session(&state, &id)?;
    let (req, bytes) = parse_body::<GridRequest>(body)?;
    let key = format!("{}:{}", s.digest, payload::body_hash(&bytes));
    if let Some(hit) = s.cached_grid(&key) {
        return Ok(JsonBody { status: StatusCode::OK, body: hit.as_ref().clone(), cache: Some("hit") });
    }
    blocking(move || {
        let (grid, _) = payload::grid_payload(&s.summary, &req)?;
        let body = Arc::new(payload::render(&grid));
        s.cache_grid(key, Arc::clone(&body));
        Ok(JsonBody { status: StatusCode::OK, body: body.as_ref().clone(), cache: Some("miss") })
    })
    .await
}

async fn realize(
    State(state): Shared,
    Path(id): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> AppResult<JsonBody> {
    let s = session(&state, &id)?;
    let (req, _) = parse_body::<RealizeRequest>(body)?;
    blocking(move || Ok(JsonBody::ok(payload::render(&payload::realize_payload(&s.summary, &req)?.0)))).await
}

/// Binds `addr` and serves until interrupted.
pub async fn serve(addr: &str, config: Config) -> AppResult<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| AppError::io(format!("cannot bind {addr}: {e}")))?;
    let local = listener.local_addr().map_err(|e| AppError::io(e.to_string()))?;
    eprintln!("listening on http://{local}");
    axum::serve(listener, router(config))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| AppError::io(e.to_string()))
}
