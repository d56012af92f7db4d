//! HTTP JSON API over a file-backed case store.
//!
//! | method | path | body |
//! |--------|------|------|
//! | GET  | `/api/v1/cases` | `[{caseId, title, revision}]` |
//! | POST | `/api/v1/cases` | canonical case JSON in, `201 {caseId, revision}` out |
//! | GET  | `/api/v1/cases/{id}` | canonical case JSON, `ETag: "<revision>"` |
//! | PUT  | `/api/v1/cases/{id}` | canonical case JSON, `If-Match: "<revision>"` required |
//! | POST | `/api/v1/cases/{id}/validate` | diagnostics |
//! | POST | `/api/v1/cases/{id}/coverage?map=ID` | `{stages, considerations}` |
//! | POST | `/api/v1/cases/{id}/evaluate` | evaluation result |
//! | GET  | `/api/v1/registry/stages` | stage list |
//! | GET  | `/api/v1/registry/considerations?map=ID` | `{map, entries}` |
//! | POST | `/api/v1/datasets/{name}` | CSV in, `201 {name, rows}` out |
//!
//! Errors are `{code, message}` with status 400, 404, 409, 422 or 500.

pub mod bodies;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::Deserialize;
use serde_json::{json, Value};
use tea_core::canonical::{to_canonical_bytes, to_canonical_json};
use tea_core::evaluate::{evaluate_case_with_map, FsStores};
use tea_core::fairness::{load_map, ConsiderationMap, MapError, DEFAULT_MAP};
use tea_core::validate::validate_with_map;

pub use store::{CaseStore, CaseSummary, StoreError, StoredCase};

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub extra: Option<Box<(&'static str, Value)>>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            extra: None,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = bodies::error(self.code, self.message);
        if let (Some(extra), Some(obj)) = (self.extra, body.as_object_mut()) {
            let (key, value) = *extra;
            obj.insert(key.to_owned(), value);
        }
        json_response(self.status, &body)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        match e {
            StoreError::NotFound(_) => ApiError::new(StatusCode::NOT_FOUND, "NotFound", message),
            StoreError::Conflict { .. } => ApiError::new(StatusCode::CONFLICT, "Conflict", message),
            StoreError::BadRequest(_) => ApiError::new(StatusCode::BAD_REQUEST, "BadRequest", message),
            StoreError::Table(t) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, t.code(), message),
            StoreError::Corrupt { .. } => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "CorruptCase", message),
            StoreError::Io { .. } => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "IoError", message),
        }
    }
}

impl From<MapError> for ApiError {
    fn from(e: MapError) -> Self {
        let message = e.to_string();
        match e {
            MapError::NotFound(_) => ApiError::new(StatusCode::NOT_FOUND, "MapNotFound", message),
            MapError::Invalid(..) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "MapInvalid", message),
            MapError::Io { .. } => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "IoError", message),
        }
    }
}

fn json_response(status: StatusCode, body: &Value) -> Response {
    (
        status,
        [(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))],
        to_canonical_bytes(body),
    )
        .into_response()
}

fn etag(revision: u64) -> HeaderValue {
    HeaderValue::from_str(&format!("\"{revision}\"")).expect("digits are a valid header value")
}

fn case_response(status: StatusCode, stored: &StoredCase) -> Response {
    (
        status,
        [
            (header::CONTENT_TYPE, HeaderValue::from_static("application/json")),
            (header::ETAG, etag(stored.case.revision)),
        ],
        to_canonical_json(&stored.case),
    )
        .into_response()
}

/// Parses `If-Match: "3"`, `W/"3"` or `3`.
fn if_match(headers: &HeaderMap) -> Result<u64, ApiError> {
    let raw = headers
        .get(header::IF_MATCH)
        .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "BadRequest", "If-Match header is required"))?;
    let text = raw.to_str().unwrap_or_default().trim();
    let text = text.strip_prefix("W/").unwrap_or(text).trim_matches('"');
    text.parse().map_err(|_| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "BadRequest",
            format!("If-Match must carry a revision number, got {text:?}"),
        )
    })
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))?
}

type Shared = Arc<CaseStore>;

#[derive(Debug, Deserialize)]
struct MapQuery {
    map: Option<String>,
}

fn map_for(store: &CaseStore, q: &MapQuery) -> Result<ConsiderationMap, ApiError> {
    Ok(load_map(q.map.as_deref().unwrap_or(DEFAULT_MAP), Some(&store.maps_dir()))?)
}

async fn list_cases(State(store): State<Shared>) -> Result<Response, ApiError> {
    let cases = blocking(move || Ok(store.list()?)).await?;
    Ok(json_response(StatusCode::OK, &json!(cases)))
}

async fn create_case(State(store): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let stored = blocking(move || Ok(store.create(&body)?)).await?;
    tracing::info!(case_id = %stored.case_id, "created case");
    let mut resp = json_response(
        StatusCode::CREATED,
        &json!({ "caseId": stored.case_id, "revision": stored.case.revision }),
    );
    let headers = resp.headers_mut();
    headers.insert(header::ETAG, etag(stored.case.revision));
    if let Ok(loc) = HeaderValue::from_str(&format!("/api/v1/cases/{}", stored.case_id)) {
        headers.insert(header::LOCATION, loc);
    }
    Ok(resp)
}

async fn get_case(State(store): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let stored = blocking(move || Ok(store.get(&id)?)).await?;
    Ok(case_response(StatusCode::OK, &stored))
}

async fn put_case(
    State(store): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let expected = if_match(&headers)?;
    let stored = blocking(move || Ok(store.save(&id, &body, expected)?)).await?;
    tracing::info!(case_id = %stored.case_id, revision = stored.case.revision, "saved case");
    Ok(case_response(StatusCode::OK, &stored))
}

async fn validate_case(
    State(store): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<MapQuery>,
) -> Result<Response, ApiError> {
    let body = blocking(move || {
        let stored = store.get(&id)?;
        let map = map_for(&store, &q)?;
        Ok(bodies::diagnostics(&validate_with_map(&stored.case, &map)))
    })
    .await?;
    Ok(json_response(StatusCode::OK, &body))
}

async fn coverage_case(
    State(store): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<MapQuery>,
) -> Result<Response, ApiError> {
    let body = blocking(move || {
        let stored = store.get(&id)?;
        let map = map_for(&store, &q)?;
        Ok(bodies::coverage(&stored.case, &map))
    })
    .await?;
    Ok(json_response(StatusCode::OK, &body))
}

async fn evaluate(
    State(store): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<MapQuery>,
) -> Result<Response, ApiError> {
    let body = blocking(move || {
        let stored = store.get(&id)?;
        let map = map_for(&store, &q)?;
        let fs = FsStores::new(store.evidence_dir(), store.datasets_dir());
        match evaluate_case_with_map(&stored.case, fs.stores(), &map) {
            Ok(result) => Ok(bodies::evaluation(&stored.case, &result)),
            Err(pre) => Err(ApiError {
                extra: Some(Box::new(("diagnostics", bodies::diagnostics(&pre.diagnostics)))),
                ..ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "PreconditionFailed", pre.to_string())
            }),
        }
    })
    .await?;
    Ok(json_response(StatusCode::OK, &body))
}

async fn registry_stages() -> Response {
    json_response(StatusCode::OK, &bodies::stages())
}

async fn registry_considerations(
    State(store): State<Shared>,
    Query(q): Query<MapQuery>,
) -> Result<Response, ApiError> {
    let body = blocking(move || Ok(bodies::considerations(&map_for(&store, &q)?))).await?;
    Ok(json_response(StatusCode::OK, &body))
}

async fn upload_dataset(
    State(store): State<Shared>,
    Path(name): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let (name, rows) = blocking(move || {
        let rows = store.put_dataset(&name, &body)?;
        Ok((name, rows))
    })
    .await?;
    Ok(json_response(StatusCode::CREATED, &json!({ "name": name, "rows": rows })))
}

pub fn router(store: Arc<CaseStore>) -> Router {
    Router::new()
        .route("/api/v1/cases", get(list_cases).post(create_case))
        .route("/api/v1/cases/{id}", get(get_case).put(put_case))
        .route("/api/v1/cases/{id}/validate", post(validate_case))
        .route("/api/v1/cases/{id}/coverage", post(coverage_case))
        .route("/api/v1/cases/{id}/evaluate", post(evaluate))
        .route("/api/v1/registry/stages", get(registry_stages))
        .route("/api/v1/registry/considerations", get(registry_considerations))
        .route("/api/v1/datasets/{name}", post(upload_dataset))
        .with_state(store)
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// Opens the store and serves until the process is stopped.
pub fn serve(addr: SocketAddr, store_dir: impl Into<PathBuf>) -> Result<(), ServeError> {
    let store = Arc::new(CaseStore::open(store_dir)?);
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        tracing::info!(%addr, root = %store.root().display(), "serving");
        axum::serve(listener, router(store)).await
    })?;
    Ok(())
}
