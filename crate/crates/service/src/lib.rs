//! Annotation service: serves timed pairwise questions over HTTP, keeps an
//! append-only answer log and exports the collected judgments.
//!
//! | Route | |
//! |---|---|
//! | `POST /session` | `{subject_id}` to `{token, subject_id, total}` |
//! | `GET /question?token=` | next question, or 204 when all are answered |
//! | `POST /answer` | `{token, question_id, choice: "left" \| "right"}` |
//! | `GET /export` | judgments as JSON lines |
//! | `GET /progress` | answer counts per subject and question |
//! | `GET /maps/{image}/{map}.png` | equalized gray rendition of a map |
//! | `GET /stimulus/{image}.png` | the stimulus image |
//! | `GET /` | the UI bundle, or a minimal built-in page |

pub mod clock;
pub mod log;
pub mod render;
pub mod state;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::body::Body;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use salbench_core::Benchmark;
use serde::{Deserialize, Serialize};
use serde_json::json;

pub use clock::{Clock, ManualClock, SystemClock};
pub use log::{Event, EventLog};
pub use state::{question_set, Choice, Progress, QuestionDef, Rejection, Store, MIN_VIEW_MS};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub manifest: PathBuf,
    /// Answer log; `None` keeps everything in memory.
    pub log: Option<PathBuf>,
    /// Seeds question order and side assignment.
    pub seed: u64,
    /// Directory with the UI bundle served at `/`.
    pub static_dir: Option<PathBuf>,
}

pub struct AppState {
    bench: Benchmark,
    store: Mutex<Store>,
    clock: Arc<dyn Clock>,
    static_dir: Option<PathBuf>,
    png_cache: Mutex<HashMap<(String, String), Arc<Vec<u8>>>>,
}

impl AppState {
    /// Loads the benchmark and replays the log.
    pub fn open(config: &ServiceConfig, clock: Arc<dyn Clock>) -> Result<Arc<Self>, String> {
        let bench = Benchmark::load(&config.manifest).map_err(|e| e.to_string())?;
        let questions = question_set(&bench).map_err(|e| e.to_string())?;
        let (log, events) = match &config.log {
            Some(p) => EventLog::open(p).map_err(|e| format!("{}: {e}", p.display()))?,
            None => (EventLog::in_memory(), Vec::new()),
        };
        let store = Store::new(config.seed, questions, log, events).map_err(|e| e.to_string())?;
        Ok(Arc::new(AppState {
            bench,
            store: Mutex::new(store),
            clock,
            static_dir: config.static_dir.clone(),
            png_cache: Mutex::new(HashMap::new()),
        }))
    }

    fn store(&self) -> std::sync::MutexGuard<'_, Store> {
        self.store.lock().unwrap_or_else(|p| p.into_inner())
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/session", post(session))
        .route("/question", get(question))
        .route("/answer", post(answer))
        .route("/export", get(export))
        .route("/progress", get(progress))
        .route("/maps/{image}/{file}", get(map_png))
        .route("/stimulus/{file}", get(stimulus))
        .fallback(get(static_file))
        .with_state(state)
}

/// Binds `addr` and serves until the process ends.
pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> std::io::Result<()> {
    let state = AppState::open(&config, Arc::new(SystemClock)).map_err(std::io::Error::other)?;
    serve_state(state, addr).await
}

pub async fn serve_state(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}

#[derive(Debug)]
pub enum ApiError {
    Rejected(Rejection),
    NotFound(String),
    Internal(String),
}

impl From<Rejection> for ApiError {
    fn from(r: Rejection) -> Self {
        ApiError::Rejected(r)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::Rejected(r) => match r {
                Rejection::UnknownSession => (StatusCode::UNAUTHORIZED, json!({"error": "unknown session token"})),
                Rejection::UnknownQuestion(q) => (StatusCode::NOT_FOUND, json!({"error": format!("unknown question {q}")})),
                Rejection::Duplicate(q) => (StatusCode::CONFLICT, json!({"error": format!("question {q} already answered")})),
                Rejection::NotServed(q) => (
                    StatusCode::UNPROCESSABLE_ENTITY,
                    json!({"error": format!("question {q} was not served to this session")}),
                ),
                Rejection::TooEarly { remaining_ms } => (
                    StatusCode::UNPROCESSABLE_ENTITY,
                    json!({"error": "answered before the minimum viewing time", "remaining_ms": remaining_ms}),
                ),
                Rejection::BadRequest(m) => (StatusCode::BAD_REQUEST, json!({"error": m})),
                Rejection::Storage(e) => (StatusCode::INTERNAL_SERVER_ERROR, json!({"error": format!("log write failed: {e}")})),
            },
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, json!({"error": m})),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, json!({"error": m})),
        };
        (status, Json(body)).into_response()
    }
}

#[derive(Deserialize)]
struct SessionRequest {
    subject_id: String,
}

async fn session(State(st): State<Arc<AppState>>, Json(req): Json<SessionRequest>) -> Result<Response, ApiError> {
    let now = st.clock.now_ms();
    let mut store = st.store();
    let token = store.open_session(&req.subject_id, now)?;
    let total = store.questions().len();
    Ok(Json(json!({"token": token, "subject_id": req.subject_id, "total": total})).into_response())
}

#[derive(Deserialize)]
struct TokenQuery {
    token: Option<String>,
}

/// What the client renders for one question.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuestionView {
    pub question_id: u64,
    pub image_id: String,
    pub stimulus_url: String,
    pub gsm_url: String,
    pub left_url: String,
    pub right_url: String,
    pub served_at: u64,
    pub min_view_ms: u64,
    pub answered: usize,
    pub total: usize,
}

fn map_url(image: &str, map: &str) -> String {
    format!("/maps/{image}/{map}.png")
}

async fn question(State(st): State<Arc<AppState>>, Query(q): Query<TokenQuery>) -> Result<Response, ApiError> {
    let token = q.token.ok_or(Rejection::UnknownSession)?;
    let now = st.clock.now_ms();
    let served = st.store().next_question(&token, now)?;
    let Some(s) = served else {
        return Ok(StatusCode::NO_CONTENT.into_response());
    };
    let img = &s.question.image_id;
    let view = QuestionView {
        question_id: s.question.question_id,
        image_id: img.clone(),
        stimulus_url: format!("/stimulus/{img}.png"),
        gsm_url: map_url(img, &s.question.gsm),
        left_url: map_url(img, &s.left),
        right_url: map_url(img, &s.right),
        served_at: s.served_at,
        min_view_ms: MIN_VIEW_MS,
        answered: s.answered,
        total: s.total,
    };
    Ok(Json(view).into_response())
}

#[derive(Deserialize)]
struct AnswerRequest {
    token: String,
    question_id: u64,
    choice: Choice,
}

async fn answer(State(st): State<Arc<AppState>>, Json(req): Json<AnswerRequest>) -> Result<Response, ApiError> {
    let now = st.clock.now_ms();
    let rec = st.store().answer(&req.token, req.question_id, req.choice, now)?;
    Ok(Json(json!({
        "question_id": req.question_id,
        "chose_a": rec.chose_a,
        "elapsed_ms": rec.answered_at - rec.served_at,
    }))
    .into_response())
}

async fn export(State(st): State<Arc<AppState>>) -> Response {
    let body = st.store().export().to_jsonl();
    ([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response()
}

async fn progress(State(st): State<Arc<AppState>>) -> Json<Progress> {
    Json(st.store().progress())
}

fn png_response(bytes: Arc<Vec<u8>>) -> Response {
    (
        [(header::CONTENT_TYPE, "image/png"), (header::CACHE_CONTROL, "max-age=3600")],
        Body::from(bytes.as_ref().clone()),
    )
        .into_response()
}

async fn map_png(
    State(st): State<Arc<AppState>>,
    UrlPath((image, file)): UrlPath<(String, String)>,
) -> Result<Response, ApiError> {
    let map_id = file
        .strip_suffix(".png")
        .ok_or_else(|| ApiError::NotFound(format!("no rendition {file}")))?
        .to_string();
    let entry = st
        .bench
        .manifest
        .image(&image)
        .ok_or_else(|| ApiError::NotFound(format!("unknown image {image}")))?;
    if !entry.maps.contains_key(&map_id) {
        return Err(ApiError::NotFound(format!("image {image} has no map {map_id}")));
    }
    let key = (image, map_id);
    if let Some(hit) = st.png_cache.lock().unwrap_or_else(|p| p.into_inner()).get(&key) {
        return Ok(png_response(hit.clone()));
    }
    let map = st
        .bench
        .load_map(&key.0, &key.1)
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    let bytes = Arc::new(render::display_png(&map));
    st.png_cache
        .lock()
        .unwrap_or_else(|p| p.into_inner())
        .insert(key, bytes.clone());
    Ok(png_response(bytes))
}

async fn stimulus(State(st): State<Arc<AppState>>, UrlPath(file): UrlPath<String>) -> Result<Response, ApiError> {
    let image = file
        .strip_suffix(".png")
        .ok_or_else(|| ApiError::NotFound(format!("no stimulus {file}")))?;
    let entry = st
        .bench
        .manifest
        .image(image)
        .ok_or_else(|| ApiError::NotFound(format!("unknown image {image}")))?;
    let path = entry.stimulus.as_ref().map(|s| st.bench.path(s));
    let bytes = render::stimulus_png(path.as_deref(), entry.width, entry.height)
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(png_response(Arc::new(bytes)))
}

/// Joins a request path onto the bundle directory, refusing anything that
/// could leave it.
fn resolve_static(root: &Path, uri_path: &str) -> Option<PathBuf> {
    let rel = uri_path.trim_start_matches('/');
    let rel = if rel.is_empty() || rel.ends_with('/') {
        format!("{rel}index.html")
    } else {
        rel.to_string()
    };
    let rel = Path::new(&rel);
    if !rel.components().all(|c| matches!(c, Component::Normal(_))) {
        return None;
    }
    Some(root.join(rel))
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).unwrap_or("") {
        "html" => "text/html; charset=utf-8",
        "js" | "mjs" => "text/javascript",
        "css" => "text/css",
        "json" => "application/json",
        "png" => "image/png",
        "svg" => "image/svg+xml",
        "ico" => "image/x-icon",
        "woff2" => "font/woff2",
        _ => "application/octet-stream",
    }
}

async fn static_file(State(st): State<Arc<AppState>>, uri: axum::http::Uri) -> Result<Response, ApiError> {
    let not_found = || ApiError::NotFound(format!("no such file {}", uri.path()));
    let Some(root) = &st.static_dir else {
        if uri.path() == "/" || uri.path() == "/index.html" {
            return Ok(([(header::CONTENT_TYPE, "text/html; charset=utf-8")], BUILTIN_PAGE).into_response());
        }
        return Err(not_found());
    };
    let path = resolve_static(root, uri.path()).ok_or_else(not_found)?;
    let bytes = std::fs::read(&path).map_err(|_| not_found())?;
    Ok(([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response())
}

const BUILTIN_PAGE: &str = r#"<!doctype html>
<html><head><meta charset="utf-8"><title>Saliency map comparison</title>
<style>body{font-family:sans-serif;margin:1em}img{width:256px;image-rendering:pixelated;margin:4px}
button{font-size:1.2em;margin:0 2em}</style></head>
<body>
<div id="login"><input id="subject" placeholder="subject id"><button id="start">Start</button></div>
<div id="task" hidden>
<p id="status"></p>
<div><img id="stim"><img id="gsm"></div>
<div><img id="left"><img id="right"></div>
<p>Which map is more similar to the ground truth?</p>
<button id="bl" disabled>Left</button><button id="br" disabled>Right</button>
</div>
<script>
let token, q, timer;
const $ = id => document.getElementById(id);
async function next() {
  const r = await fetch('/question?token=' + token);
  if (r.status === 204) { $('task').innerHTML = '<p>All questions answered. Thank you.</p>'; return; }
  q = await r.json();
  $('stim').src = q.stimulus_url; $('gsm').src = q.gsm_url;
  $('left').src = q.left_url; $('right').src = q.right_url;
  $('status').textContent = (q.answered + 1) + ' / ' + q.total;
  lock(q.min_view_ms);
}
function lock(ms) {
  $('bl').disabled = $('br').disabled = true;
  clearTimeout(timer);
  timer = setTimeout(() => { $('bl').disabled = $('br').disabled = false; }, ms);
}
async function choose(choice) {
  if ($('bl').disabled) return;
  $('bl').disabled = $('br').disabled = true;
  const r = await fetch('/answer', {method: 'POST', headers: {'content-type': 'application/json'},
    body: JSON.stringify({token, question_id: q.question_id, choice})});
  if (r.status === 422) { const e = await r.json(); if (e.remaining_ms) { lock(e.remaining_ms); return; } }
  next();
}
$('start').onclick = async () => {
  const r = await fetch('/session', {method: 'POST', headers: {'content-type': 'application/json'},
    body: JSON.stringify({subject_id: $('subject').value})});
  if (!r.ok) { alert((await r.json()).error); return; }
  token = (await r.json()).token;
  $('login').hidden = true; $('task').hidden = false; next();
};
$('bl').onclick = () => choose('left'); $('br').onclick = () => choose('right');
document.onkeydown = e => { if (e.key === 'ArrowLeft') choose('left'); if (e.key === 'ArrowRight') choose('right'); };
</script></body></html>
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_paths_stay_inside_the_root() {
        let root = Path::new("/srv/ui");
        assert_eq!(resolve_static(root, "/"), Some(root.join("index.html")));
        assert_eq!(resolve_static(root, "/app/main.js"), Some(root.join("app/main.js")));
        assert_eq!(resolve_static(root, "/../etc/passwd"), None);
        assert_eq!(resolve_static(root, "/a/./b"), Some(root.join("a/b")));
        assert_eq!(resolve_static(root, "//etc/passwd"), Some(root.join("etc/passwd")));
    }
}
