//! HTTP orchestration service under `/v1`.
//!
//! Every JSON document carries `format_version`. Errors are
//! `{"format_version", "error": {"code", "message", ...}}`.

mod registry;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use axum::body::{Body, Bytes};
use axum::extract::{Path as UrlPath, Query, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub use registry::{CreateOutcome, Registry, RunState, RunView};
pub use crate::scenario::{preview_document, PreviewDocument};

use crate::runner::read_dataset;
use crate::scenario::{validate_spec, ExperimentSpec, Violation};
use crate::validation::{ensemble_report, waterfall, DEFAULT_MAX_LAG};
use crate::FORMAT_VERSION;

pub const ARTIFACTS: [&str; 8] = ["manifest", "iq", "kpis", "mobility", "events", "stats", "waterfall", "preview_trajectory"];

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub data_dir: PathBuf,
    pub port: u16,
    pub workers: usize,
    /// When set, every request must carry `Authorization: Bearer <token>`.
    pub token: Option<String>,
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Clone)]
struct AppState {
    registry: Registry,
    token: Option<String>,
}

/// Builds the `/v1` router over an open registry.
pub fn router(registry: Registry, token: Option<String>) -> Router {
    let state = AppState { registry, token };
    Router::new()
        .route("/v1/experiments", post(create_experiment))
        .route("/v1/experiments/{id}", get(get_experiment))
        .route("/v1/experiments/{id}/run", post(start_run))
        .route("/v1/runs", get(list_runs))
        .route("/v1/runs/{id}", get(get_run))
        .route("/v1/runs/{id}/artifacts/{name}", get(get_artifact))
        .route("/v1/runs/{id}/preview", get(run_preview))
        .route("/v1/preview", post(spec_preview))
        .route("/v1/compare", post(compare))
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state)
}

/// Opens the registry, binds, and serves until Ctrl-C.
pub async fn serve(cfg: ServeConfig) -> crate::Result<()> {
    let registry = Registry::open(&cfg.data_dir, cfg.workers)?;
    let app = router(registry.clone(), cfg.token.clone());
    let addr = SocketAddr::from(([0, 0, 0, 0], cfg.port));
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| crate::Error::io(&cfg.data_dir, e))?;
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| crate::Error::io(&cfg.data_dir, e))?;
    let reg = registry.clone();
    let _ = tokio::task::spawn_blocking(move || reg.shutdown()).await;
    Ok(())
}

#[derive(Debug)]
struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    extra: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into(), extra: Value::Null }
    }

    fn with(mut self, extra: Value) -> Self {
        self.extra = extra;
        self
    }

    fn not_found(what: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("{what} not found"))
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
    }

    fn invalid_spec(violations: Vec<Violation>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_spec", "experiment spec is invalid").with(json!({ "violations": violations }))
    }
}

impl From<crate::Error> for ApiError {
    fn from(e: crate::Error) -> Self {
        match e {
            crate::Error::InvalidSpec(v) => Self::invalid_spec(v),
            crate::Error::Integrity { .. } => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "integrity", e.to_string()),
            other => Self::internal(other),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut error = json!({ "code": self.code, "message": self.message });
        if let Value::Object(extra) = self.extra {
            error.as_object_mut().unwrap().extend(extra);
        }
        (self.status, Json(json!({ "format_version": FORMAT_VERSION, "error": error }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn require_token(State(state): State<AppState>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.token {
        let ok = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|v| v == token);
        if !ok {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token").into_response();
        }
    }
    next.run(req).await
}

fn parse_spec(body: &[u8]) -> ApiResult<ExperimentSpec> {
    let text = std::str::from_utf8(body).map_err(|_| ApiError::invalid_spec(vec![Violation { field: "body".into(), reason: "not valid UTF-8".into() }]))?;
    let spec = ExperimentSpec::from_json(text).map_err(|e| ApiError::invalid_spec(vec![Violation { field: "body".into(), reason: e.to_string() }]))?;
    let violations = validate_spec(&spec);
    if violations.is_empty() {
        Ok(spec)
    } else {
        Err(ApiError::invalid_spec(violations))
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(ApiError::internal)?
}

#[derive(Debug, Deserialize)]
struct CreateQuery {
    /// Submit to the workers immediately.
    #[serde(default)]
    start: bool,
}

async fn create_experiment(State(state): State<AppState>, Query(q): Query<CreateQuery>, headers: HeaderMap, body: Bytes) -> ApiResult<Response> {
    let spec = parse_spec(&body)?;
    let key = headers.get("idempotency-key").and_then(|v| v.to_str().ok()).map(str::to_string);
    let digest = hex::encode(Sha256::digest(&body));
    let reg = state.registry.clone();
    let outcome = blocking(move || reg.create(spec, digest, key).map_err(ApiError::from)).await?;
    let (status, id) = match outcome {
        CreateOutcome::Created(id) => (StatusCode::CREATED, id),
        CreateOutcome::Existing(id) => (StatusCode::OK, id),
        CreateOutcome::Conflict(id) => {
            return Err(ApiError::new(StatusCode::CONFLICT, "idempotency_conflict", "idempotency key was already used with a different body")
                .with(json!({ "run_id": id })))
        }
    };
    if q.start {
        let reg = state.registry.clone();
        let sid = id.clone();
        blocking(move || reg.submit(&sid).map_err(ApiError::from)).await?;
    }
    let view = state.registry.get(&id).ok_or_else(|| ApiError::not_found("run"))?;
    Ok((status, [(header::LOCATION, format!("/v1/runs/{id}"))], Json(view)).into_response())
}

#[derive(Debug, Serialize)]
struct ExperimentView {
    format_version: u32,
    id: String,
    run_id: String,
    spec: ExperimentSpec,
    created_unix_s: f64,
}

async fn get_experiment(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<ExperimentView>> {
    let run = state.registry.get(&id).ok_or_else(|| ApiError::not_found("experiment"))?;
    Ok(Json(ExperimentView {
        format_version: FORMAT_VERSION,
        id: id.clone(),
        run_id: id,
        spec: run.spec,
        created_unix_s: run.created_unix_s,
    }))
}

/// 202 when newly submitted; 200 with the current record if it already was.
async fn start_run(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let reg = state.registry.clone();
    let sid = id.clone();
    let submitted = blocking(move || reg.submit(&sid).map_err(ApiError::from)).await?.ok_or_else(|| ApiError::not_found("experiment"))?;
    let view = state.registry.get(&id).ok_or_else(|| ApiError::not_found("run"))?;
    let status = if submitted { StatusCode::ACCEPTED } else { StatusCode::OK };
    Ok((status, Json(view)).into_response())
}

async fn get_run(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<RunView>> {
    state.registry.get(&id).map(Json).ok_or_else(|| ApiError::not_found("run"))
}

async fn list_runs(State(state): State<AppState>) -> Json<Value> {
    Json(json!({ "format_version": FORMAT_VERSION, "runs": state.registry.list() }))
}

#[derive(Debug, Default, Deserialize)]
struct UeQuery {
    ue: Option<String>,
}

/// `ue` may be a 0-based index or a UE id; defaults to the first UE.
fn resolve_ue(spec: &ExperimentSpec, ue: Option<&str>) -> ApiResult<usize> {
    let Some(raw) = ue else { return Ok(0) };
    let found = match raw.parse::<usize>() {
        Ok(i) if i < spec.ues.len() => Some(i),
        _ => spec.ues.iter().position(|u| u.id == raw),
    };
    found.ok_or_else(|| ApiError::not_found(&format!("ue {raw:?}")))
}

fn file_response(path: &Path, content_type: &'static str) -> ApiResult<Response> {
    let bytes = std::fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            ApiError::not_found("artifact")
        } else {
            ApiError::internal(e)
        }
    })?;
    let mut resp = Response::new(Body::from(bytes));
    resp.headers_mut().insert(header::CONTENT_TYPE, HeaderValue::from_static(content_type));
    Ok(resp)
}

async fn get_artifact(State(state): State<AppState>, UrlPath((id, name)): UrlPath<(String, String)>, Query(q): Query<UeQuery>) -> ApiResult<Response> {
    let run = state.registry.get(&id).ok_or_else(|| ApiError::not_found("run"))?;
    if !ARTIFACTS.contains(&name.as_str()) {
        return Err(ApiError::not_found(&format!("artifact {name:?}")).with(json!({ "available": ARTIFACTS })));
    }
    if name == "preview_trajectory" {
        return Ok(Json(preview_document(&run.spec)).into_response());
    }
    if run.state != RunState::Completed {
        return Err(ApiError::new(StatusCode::CONFLICT, "not_completed", format!("run is {:?}", run.state).to_lowercase()).with(json!({ "state": run.state })));
    }
    let u = resolve_ue(&run.spec, q.ue.as_deref())?;
    let dataset = state.registry.dataset_dir(&id);
    let run_dir = state.registry.run_dir(&id);
    blocking(move || match name.as_str() {
        "manifest" => file_response(&dataset.join("manifest.json"), "application/json"),
        "iq" => file_response(&dataset.join(format!("ue{u}/iq.bin")), "application/octet-stream"),
        "kpis" => file_response(&dataset.join(format!("ue{u}/kpis.csv")), "text/csv"),
        "mobility" => file_response(&dataset.join(format!("ue{u}/mobility.csv")), "text/csv"),
        "events" => file_response(&dataset.join(format!("ue{u}/events.log")), "text/plain"),
        "stats" => file_response(&run_dir.join("stats.json"), "application/json"),
        "waterfall" => {
            let path = run_dir.join(format!("waterfall_ue{u}.csv"));
            if !path.exists() {
                let ds = read_dataset(&dataset)?;
                let csv = waterfall(&ds.ues[u].iq).to_csv();
                let tmp = path.with_extension("csv.tmp");
                std::fs::write(&tmp, csv).map_err(ApiError::internal)?;
                std::fs::rename(&tmp, &path).map_err(ApiError::internal)?;
            }
            file_response(&path, "text/csv")
        }
        _ => Err(ApiError::not_found("artifact")),
    })
    .await
}

async fn run_preview(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<PreviewDocument>> {
    let run = state.registry.get(&id).ok_or_else(|| ApiError::not_found("run"))?;
    Ok(Json(preview_document(&run.spec)))
}

async fn spec_preview(body: Bytes) -> ApiResult<Json<PreviewDocument>> {
    let spec = parse_spec(&body)?;
    Ok(Json(preview_document(&spec)))
}

#[derive(Debug, Deserialize)]
struct CompareQuery {
    a: String,
    b: String,
    ue: Option<String>,
    max_lag: Option<usize>,
}

/// Ensemble report over one UE of two completed runs; the document is also
/// stored as run `a`'s `stats` artifact.
async fn compare(State(state): State<AppState>, Query(q): Query<CompareQuery>) -> ApiResult<Response> {
    let mut specs = Vec::new();
    for id in [&q.a, &q.b] {
        let run = state.registry.get(id).ok_or_else(|| ApiError::not_found(&format!("run {id}")))?;
        if run.state != RunState::Completed {
            return Err(ApiError::new(StatusCode::CONFLICT, "not_completed", format!("run {id} is not completed")).with(json!({ "run_id": id, "state": run.state })));
        }
        specs.push(run.spec);
    }
    let ua = resolve_ue(&specs[0], q.ue.as_deref())?;
    let ub = resolve_ue(&specs[1], q.ue.as_deref())?;
    let (dir_a, dir_b) = (state.registry.dataset_dir(&q.a), state.registry.dataset_dir(&q.b));
    let out = state.registry.run_dir(&q.a).join("stats.json");
    let max_lag = q.max_lag.unwrap_or(DEFAULT_MAX_LAG);
    blocking(move || {
        let a = read_dataset(&dir_a)?;
        let b = read_dataset(&dir_b)?;
        let (ta, tb) = (&a.ues[ua].iq, &b.ues[ub].iq);
        if ta.dims() != tb.dims() {
            return Err(ApiError::new(StatusCode::CONFLICT, "dims_mismatch", format!("dims differ: {} vs {}", ta.dims().shape_string(), tb.dims().shape_string()))
                .with(json!({ "dims_a": ta.dims(), "dims_b": tb.dims() })));
        }
        let report = ensemble_report(ta, tb, max_lag)?;
        let text = serde_json::to_string_pretty(&report).map_err(ApiError::internal)?;
        std::fs::write(&out, &text).map_err(ApiError::internal)?;
        let mut resp = Response::new(Body::from(text));
        resp.headers_mut().insert(header::CONTENT_TYPE, HeaderValue::from_static("application/json"));
        Ok(resp)
    })
    .await
}
