//! HTTP routes.

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::Uri;
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use memaudit_core::labels::now_utc_seconds;
use memaudit_core::{BinaryLabel, Grade, LabelRecord};
use serde::Deserialize;
use serde_json::json;

use crate::error::ReviewError;
use crate::render::render_png;
use crate::session::{PairStatus, ReviewSession};

const INDEX_HTML: &str = include_str!("index.html");

impl IntoResponse for ReviewError {
    fn into_response(self) -> Response {
        let status = match &self {
            ReviewError::NotFound(_) | ReviewError::UnresolvedId(_) => StatusCode::NOT_FOUND,
            ReviewError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ReviewError::Core(memaudit_core::Error::InvalidInput(_)) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            log::error!("{self}");
        }
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

type Shared = Arc<ReviewSession>;
type ApiResult<T> = Result<T, ReviewError>;

#[derive(Deserialize)]
struct PairsQuery {
    status: Option<String>,
    labeler: Option<String>,
}

#[derive(Deserialize)]
struct ImageQuery {
    slice: Option<usize>,
}

#[derive(Deserialize)]
struct LabelBody {
    train_id: String,
    synth_id: String,
    binary_label: Option<BinaryLabel>,
    grade: Option<Grade>,
    labeler: String,
    timestamp: Option<u64>,
}

async fn get_session(State(s): State<Shared>) -> impl IntoResponse {
    Json(s.summary())
}

async fn pairs(State(s): State<Shared>, Query(q): Query<PairsQuery>) -> ApiResult<impl IntoResponse> {
    let status = match q.status.as_deref() {
        None | Some("all") => PairStatus::All,
        Some("pending") => PairStatus::Pending,
        Some("labeled") => PairStatus::Labeled,
        Some(other) => return Err(ReviewError::BadRequest(format!("unknown status {other:?}"))),
    };
    Ok(Json(s.pairs(status, q.labeler.as_deref())))
}

async fn pair(State(s): State<Shared>, Path(i): Path<usize>) -> ApiResult<impl IntoResponse> {
    let p = s.pair(i).ok_or_else(|| ReviewError::NotFound(format!("pair {i}")))?.clone();
    let labels: Vec<LabelRecord> = s
        .session_labels()
        .into_iter()
        .filter(|r| r.train_id == p.train_id && r.synth_id == p.synth_id)
        .collect();
    let s2 = s.clone();
    let (train, synth) = (p.train_id.clone(), p.synth_id.clone());
    let dims = tokio::task::spawn_blocking(move || -> ApiResult<_> {
        Ok((s2.images().load(&train)?.dims().to_vec(), s2.images().load(&synth)?.dims().to_vec()))
    })
    .await
    .map_err(|e| ReviewError::Render(e.to_string()))??;
    Ok(Json(json!({
        "pair": p,
        "labels": labels,
        "train_dims": dims.0,
        "synth_dims": dims.1,
    })))
}

async fn image(
    State(s): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<ImageQuery>,
) -> ApiResult<impl IntoResponse> {
    let png = tokio::task::spawn_blocking(move || render_png(&s.images().load(&id)?, q.slice))
        .await
        .map_err(|e| ReviewError::Render(e.to_string()))??;
    Ok(([(header::CONTENT_TYPE, "image/png")], png))
}

async fn post_label(State(s): State<Shared>, Json(body): Json<LabelBody>) -> ApiResult<impl IntoResponse> {
    let rec = LabelRecord {
        train_id: body.train_id,
        synth_id: body.synth_id,
        binary_label: body.binary_label,
        grade: body.grade,
        labeler: body.labeler,
        timestamp: body.timestamp.unwrap_or_else(now_utc_seconds),
    };
    let saved = tokio::task::spawn_blocking(move || s.record(rec))
        .await
        .map_err(|e| ReviewError::Render(e.to_string()))??;
    Ok((StatusCode::CREATED, Json(saved)))
}

async fn metrics(State(s): State<Shared>) -> ApiResult<impl IntoResponse> {
    let report = s.metrics()?;
    Ok(Json(json!({
        "counts": report.counts,
        "sensitivity": report.sensitivity,
        "specificity": report.specificity,
        "n_labels": report.counts.total(),
    })))
}

/// API routes plus static UI assets at `/`: files from `ui_dir` when given,
/// otherwise a built-in minimal page.
pub fn router(session: Arc<ReviewSession>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/session", get(get_session))
        .route("/api/pairs", get(pairs))
        .route("/api/pair/{i}", get(pair))
        .route("/api/image/{id}", get(image))
        .route("/api/labels", post(post_label))
        .route("/api/metrics", get(metrics))
        .with_state(session);
    match ui_dir {
        Some(dir) => api.fallback(move |uri: Uri| static_file(dir.clone(), uri)),
        None => api.route("/", get(|| async { Html(INDEX_HTML) })),
    }
}

fn content_type(path: &std::path::Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        _ => "application/octet-stream",
    }
}

async fn static_file(root: PathBuf, uri: Uri) -> ApiResult<impl IntoResponse> {
    let rel = uri.path().trim_start_matches('/');
    let rel = if rel.is_empty() { "index.html" } else { rel };
    if rel.split('/').any(|seg| seg == ".." || seg.starts_with('.')) {
        return Err(ReviewError::NotFound(uri.path().to_string()));
    }
    let path = root.join(rel);
    let body = tokio::fs::read(&path)
        .await
        .map_err(|_| ReviewError::NotFound(uri.path().to_string()))?;
    Ok(([(header::CONTENT_TYPE, content_type(&path))], body))
}
