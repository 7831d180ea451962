//! HTTP routes over a shared [`ServiceState`].

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use tokio::sync::RwLock;
use tower_http::services::ServeDir;

use crate::session::{Mesh, Segmentation, ServiceState, SessionError, Status, Summary};

pub type SharedState = Arc<RwLock<ServiceState>>;

const INDEX_HTML: &str = include_str!("../assets/index.html");

#[derive(Debug, Error)]
pub enum StartupError {
    #[error("static directory {0} does not exist")]
    MissingStaticDir(PathBuf),
    #[error("static directory {0} has no index.html")]
    MissingIndex(PathBuf),
    #[error(transparent)]
    Project(#[from] SessionError),
}

#[derive(Debug, Clone, Default)]
pub struct ServiceOptions {
    /// Project directory loaded before the first request.
    pub project: Option<PathBuf>,
    /// Directory served at `/` instead of the bundled page.
    pub static_dir: Option<PathBuf>,
}

pub fn check_static_dir(dir: &Path) -> Result<(), StartupError> {
    if !dir.is_dir() {
        return Err(StartupError::MissingStaticDir(dir.to_path_buf()));
    }
    if !dir.join("index.html").is_file() {
        return Err(StartupError::MissingIndex(dir.to_path_buf()));
    }
    Ok(())
}

/// Builds the router, loading the project and checking the static
/// directory first.
pub fn app(opts: &ServiceOptions) -> Result<(Router, SharedState), StartupError> {
    if let Some(dir) = &opts.static_dir {
        check_static_dir(dir)?;
    }
    let mut state = ServiceState::default();
    if let Some(project) = &opts.project {
        state.load(project)?;
    }
    let shared = Arc::new(RwLock::new(state));
    Ok((router(shared.clone(), opts.static_dir.as_deref()), shared))
}

pub fn router(state: SharedState, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/session", post(load_session))
        .route("/api/status", get(status))
        .route("/api/mesh", get(mesh))
        .route("/api/segmentation", get(segmentation))
        .route("/api/resegment", post(resegment))
        .route("/api/merge", post(merge))
        .route("/api/barrier", post(barrier))
        .route("/api/export", get(export_png))
        .route("/api/export/segments", get(export_sidecar))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(INDEX_HTML) })),
    }
}

/// Error response with a JSON body `{"error": ..., "revision": ...}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    revision: Option<u64>,
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let (status, revision) = match &e {
            SessionError::NotLoaded => (StatusCode::CONFLICT, None),
            SessionError::Stale { current, .. } => (StatusCode::CONFLICT, Some(*current)),
            SessionError::UnknownSegment(_) | SessionError::UnknownEdge(_) => (StatusCode::NOT_FOUND, None),
            SessionError::InvalidParameter(_) | SessionError::Load { .. } => (StatusCode::BAD_REQUEST, None),
            SessionError::Export(_) => (StatusCode::INTERNAL_SERVER_ERROR, None),
        };
        Self {
            status,
            message: e.to_string(),
            revision,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = match self.revision {
            Some(rev) => json!({ "error": self.message, "revision": rev }),
            None => json!({ "error": self.message }),
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Deserialize)]
pub struct LoadRequest {
    pub project: PathBuf,
}

#[derive(Debug, Deserialize)]
pub struct RevQuery {
    pub rev: Option<u64>,
}

#[derive(Debug, Deserialize)]
pub struct ResegmentRequest {
    pub kappa: Option<f64>,
    pub a_min: Option<f64>,
}

#[derive(Debug, Deserialize)]
pub struct MergeRequest {
    pub a: u32,
    pub b: u32,
}

#[derive(Debug, Deserialize)]
pub struct BarrierRequest {
    pub edge_id: usize,
}

#[derive(Debug, Serialize)]
pub struct EditResponse {
    pub revision: u64,
    pub segment_count: usize,
}

#[derive(Debug, Serialize)]
pub struct BarrierResponse {
    pub revision: u64,
    pub segment_count: usize,
    pub edge_id: usize,
    pub barred: bool,
}

async fn load_session(State(state): State<SharedState>, Json(req): Json<LoadRequest>) -> ApiResult<Status> {
    Ok(Json(state.write().await.load(&req.project)?))
}

async fn status(State(state): State<SharedState>) -> Json<Status> {
    Json(state.read().await.status())
}

async fn mesh(State(state): State<SharedState>) -> ApiResult<Mesh> {
    Ok(Json(state.read().await.session()?.mesh()))
}

async fn segmentation(State(state): State<SharedState>, Query(q): Query<RevQuery>) -> ApiResult<Segmentation> {
    let guard = state.read().await;
    let session = guard.session()?;
    if let Some(requested) = q.rev {
        if requested != session.revision() {
            return Err(SessionError::Stale {
                requested,
                current: session.revision(),
            }
            .into());
        }
    }
    Ok(Json(session.segmentation()))
}

async fn resegment(State(state): State<SharedState>, Json(req): Json<ResegmentRequest>) -> ApiResult<Summary> {
    let mut guard = state.write().await;
    let session = guard.session_mut()?;
    let current = session.summary();
    let kappa = req.kappa.unwrap_or(current.kappa);
    let a_min = req.a_min.unwrap_or(current.a_min);
    Ok(Json(session.resegment(kappa, a_min)?))
}

async fn merge(State(state): State<SharedState>, Json(req): Json<MergeRequest>) -> ApiResult<EditResponse> {
    let mut guard = state.write().await;
    let session = guard.session_mut()?;
    let revision = session.merge(req.a, req.b)?;
    Ok(Json(EditResponse {
        revision,
        segment_count: session.result().segment_count,
    }))
}

async fn barrier(State(state): State<SharedState>, Json(req): Json<BarrierRequest>) -> ApiResult<BarrierResponse> {
    let mut guard = state.write().await;
    let session = guard.session_mut()?;
    let barred = session.toggle_barrier(req.edge_id)?;
    Ok(Json(BarrierResponse {
        revision: session.revision(),
        segment_count: session.result().segment_count,
        edge_id: req.edge_id,
        barred,
    }))
}

async fn export_png(State(state): State<SharedState>) -> Result<Response, ApiError> {
    let bytes = state.read().await.session()?.export_png()?;
    Ok((
        [
            (header::CONTENT_TYPE, "image/png"),
            (header::CONTENT_DISPOSITION, "attachment; filename=\"labels.png\""),
        ],
        bytes,
    )
        .into_response())
}

async fn export_sidecar(State(state): State<SharedState>) -> Result<Response, ApiError> {
    let text = state.read().await.session()?.export_sidecar()?;
    Ok(([(header::CONTENT_TYPE, "application/json")], text).into_response())
}
