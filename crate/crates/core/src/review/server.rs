//! JSON-over-HTTP front of a [`ReviewSession`].
//!
//! Routes:
//! - `GET /api/session`: queue metadata and progress
//! - `GET /api/pairs/next?annotator=<id>`: next unanswered pair, or `done: true`
//! - `POST /api/verdicts` with `{a, b, annotator, value}`: 201 on success,
//!   400 on a malformed body, 404 for a pair outside the queue, 409 on a repeat
//! - `GET /api/stats`: per-annotator progress, raw agreement and kappa
//! - `GET /api/images/<image_id>`: image bytes
//! - `GET /`: the review UI bundle when a UI directory is configured

use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::body::{Body, Bytes};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode, Uri};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use log::info;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{ReviewSession, Verdict, VerdictValue};
use crate::embeddings::PairKey;
use crate::error::Error;
use crate::manifest::DatasetManifest;

const PLACEHOLDER_INDEX: &str = "<!doctype html><html><head><meta charset=\"utf-8\"><title>review</title></head>\
<body><p>No review UI bundle is installed. The JSON API is available under <code>/api/</code>.</p></body></html>";

/// Shared state behind the router.
pub struct ReviewState {
    session: RwLock<ReviewSession>,
    manifest: Option<DatasetManifest>,
    image_root: Option<PathBuf>,
    ui_dir: Option<PathBuf>,
}

impl ReviewState {
    pub fn new(session: ReviewSession) -> Self {
        ReviewState {
            session: RwLock::new(session),
            manifest: None,
            image_root: None,
            ui_dir: None,
        }
    }

    /// Labels shown next to each image.
    pub fn with_manifest(mut self, m: DatasetManifest) -> Self {
        self.manifest = Some(m);
        self
    }

    /// Directory that manifest file paths (or `<id>.<ext>` names) resolve against.
    pub fn with_image_root(mut self, root: impl Into<PathBuf>) -> Self {
        self.image_root = Some(root.into());
        self
    }

    /// Static bundle served under `/`.
    pub fn with_ui_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.ui_dir = Some(dir.into());
        self
    }

    fn image_path(&self, id: &str) -> Option<PathBuf> {
        let root = self.image_root.as_deref()?;
        if let Some(r) = self.manifest.as_ref().and_then(|m| m.get(id)) {
            if !r.file_path.is_empty() {
                let p = safe_join(root, &r.file_path)?;
                if p.is_file() {
                    return Some(p);
                }
            }
        }
        ["jpg", "jpeg", "png"]
            .iter()
            .filter_map(|ext| safe_join(root, &format!("{id}.{ext}")))
            .find(|p| p.is_file())
    }
}

/// Joins `rel` under `root`, refusing absolute paths and parent components.
fn safe_join(root: &Path, rel: &str) -> Option<PathBuf> {
    let rel = Path::new(rel);
    if rel.components().all(|c| matches!(c, Component::Normal(_) | Component::CurDir)) {
        Some(root.join(rel))
    } else {
        None
    }
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("png") => "image/png",
        Some("bmp") => "image/bmp",
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        _ => "application/octet-stream",
    }
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            Error::Conflict(_) => StatusCode::CONFLICT,
            Error::Argument(_) | Error::Parse { .. } => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.into())
}

#[derive(Debug, Deserialize)]
struct NextQuery {
    annotator: Option<String>,
    session: Option<String>,
}

#[derive(Debug, Serialize)]
struct ImageView {
    image_id: String,
    url: String,
    diagnosis: Option<String>,
    fst: Option<u8>,
    group_id: Option<String>,
}

#[derive(Debug, Deserialize)]
struct VerdictBody {
    a: String,
    b: String,
    annotator: String,
    value: String,
    #[serde(default)]
    session: Option<String>,
}

type Shared = Arc<ReviewState>;

fn check_session(session: &ReviewSession, requested: Option<&str>) -> Result<(), ApiError> {
    match requested {
        Some(id) if id != session.id() => Err(ApiError(StatusCode::NOT_FOUND, format!("unknown session {id}"))),
        _ => Ok(()),
    }
}

fn image_view(state: &ReviewState, id: &str) -> ImageView {
    let r = state.manifest.as_ref().and_then(|m| m.get(id));
    ImageView {
        image_id: id.to_string(),
        url: format!("/api/images/{id}"),
        diagnosis: r.map(|r| r.diagnosis.clone()),
        fst: r.map(|r| r.fst),
        group_id: r.and_then(|r| r.group_id.clone()),
    }
}

async fn session_info(State(state): State<Shared>) -> Json<serde_json::Value> {
    let s = state.session.read().unwrap();
    let stats = s.stats();
    Json(json!({
        "session_id": s.id(),
        "total": s.queue().len(),
        "verdicts": s.verdicts().len(),
        "annotators": stats.annotators,
    }))
}

async fn next_pair(State(state): State<Shared>, Query(q): Query<NextQuery>) -> Result<Json<serde_json::Value>, ApiError> {
    let annotator = q
        .annotator
        .filter(|a| !a.is_empty())
        .ok_or_else(|| bad_request("missing annotator query parameter"))?;
    let s = state.session.read().unwrap();
    check_session(&s, q.session.as_deref())?;
    let total = s.queue().len();
    let body = match s.next_pair(&annotator) {
        None => json!({
            "session_id": s.id(),
            "done": true,
            "position": total,
            "total": total,
            "answered": s.answered_by(&annotator),
        }),
        Some((position, pair)) => json!({
            "session_id": s.id(),
            "done": false,
            "position": position,
            "total": total,
            "answered": s.answered_by(&annotator),
            "a": image_view(&state, &pair.a),
            "b": image_view(&state, &pair.b),
            "score": pair.score,
        }),
    };
    Ok(Json(body))
}

async fn post_verdict(State(state): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let body: VerdictBody = serde_json::from_slice(&body).map_err(|e| bad_request(format!("invalid body: {e}")))?;
    let value: VerdictValue = body.value.parse().map_err(bad_request)?;
    if body.a == body.b {
        return Err(bad_request("a and b must differ"));
    }
    let mut s = state.session.write().unwrap();
    check_session(&s, body.session.as_deref())?;
    let v = Verdict::now(PairKey::new(body.a, body.b), body.annotator, value);
    let annotator = v.annotator.clone();
    let stored = s.record_verdict(v)?;
    let next = s.next_pair(&annotator).map(|(i, _)| i);
    info!("verdict {stored} from {annotator}");
    Ok((StatusCode::CREATED, Json(json!({ "stored": stored, "next_position": next }))).into_response())
}

async fn stats(State(state): State<Shared>) -> Json<super::SessionStats> {
    Json(state.session.read().unwrap().stats())
}

async fn image(State(state): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let path = state
        .image_path(&id)
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("no image for {id}")))?;
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, content_type(&path))], Body::from(bytes)).into_response())
}

async fn index(State(state): State<Shared>) -> Response {
    if let Some(dir) = &state.ui_dir {
        if let Ok(text) = tokio::fs::read_to_string(dir.join("index.html")).await {
            return Html(text).into_response();
        }
    }
    Html(PLACEHOLDER_INDEX).into_response()
}

async fn static_file(State(state): State<Shared>, uri: Uri) -> Response {
    let not_found = || (StatusCode::NOT_FOUND, "not found").into_response();
    let Some(dir) = &state.ui_dir else {
        return not_found();
    };
    let Some(path) = safe_join(dir, uri.path().trim_start_matches('/')) else {
        return not_found();
    };
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&path))], Body::from(bytes)).into_response(),
        Err(_) => not_found(),
    }
}

pub fn router(state: Arc<ReviewState>) -> Router {
    Router::new()
        .route("/", get(index))
        .route("/api/session", get(session_info))
        .route("/api/pairs/next", get(next_pair))
        .route("/api/verdicts", post(post_verdict))
        .route("/api/stats", get(stats))
        .route("/api/images/{image_id}", get(image))
        .fallback(static_file)
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(state: Arc<ReviewState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    info!("review service listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
