//! HTTP service for the human review queue.
//!
//! ```text
//! GET  /api/queue?cursor=&limit=   pending records, paged by id
//! POST /api/decisions              apply a decision (needs X-Review-Secret)
//! GET  /api/stats                  counts per status and error type
//! GET  /                           review UI bundle, when configured
//! ```
//!
//! Error responses carry `{"error": CODE, "message": ...}`.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

use crate::validate::{Decision, DecisionKind, QueuePage, RecordStore, Status, StoreStats, ValidateError};

pub const SECRET_HEADER: &str = "x-review-secret";
pub const SECRET_ENV: &str = "MINPAIR_REVIEW_SECRET";
pub const DEFAULT_PAGE: usize = 20;
pub const MAX_PAGE: usize = 500;

const PLACEHOLDER_PAGE: &str = "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>minpair review</title></head>\n<body><p>No review UI bundle is configured. The API is served under <code>/api</code>.</p></body></html>\n";

#[derive(Clone)]
struct AppState {
    store: Arc<Mutex<RecordStore>>,
    secret: Arc<str>,
}

#[derive(Debug, Deserialize)]
pub struct QueueParams {
    pub cursor: Option<String>,
    pub limit: Option<usize>,
}

/// Body of `POST /api/decisions`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionRequest {
    pub id: String,
    pub decision: DecisionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manually_derived_correct: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub expected_version: u64,
    pub reviewer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionResponse {
    pub id: String,
    pub status: Status,
    pub version: u64,
    /// The decision had already been applied by an earlier request.
    pub replayed: bool,
}

struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }
}

impl From<ValidateError> for ApiError {
    fn from(e: ValidateError) -> Self {
        let (status, code) = match &e {
            ValidateError::UnknownRecord(_) => (StatusCode::NOT_FOUND, "UNKNOWN_RECORD"),
            ValidateError::VersionConflict { .. } => (StatusCode::CONFLICT, "VERSION_CONFLICT"),
            ValidateError::IllegalTransition { .. } => {
                (StatusCode::UNPROCESSABLE_ENTITY, "ILLEGAL_TRANSITION")
            }
            ValidateError::MissingCorrectedText(_) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "MISSING_CORRECTED_TEXT")
            }
            ValidateError::UnchangedCorrectedText(_) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "UNCHANGED_CORRECTED_TEXT")
            }
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "STORE_ERROR"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(json!({ "error": self.code, "message": self.message })),
        )
            .into_response()
    }
}

fn secret_matches(given: &str, expected: &str) -> bool {
    given.len() == expected.len()
        && given
            .bytes()
            .zip(expected.bytes())
            .fold(0u8, |acc, (a, b)| acc | (a ^ b))
            == 0
}

async fn queue(State(app): State<AppState>, Query(params): Query<QueueParams>) -> Json<QueuePage> {
    let limit = params.limit.unwrap_or(DEFAULT_PAGE).clamp(1, MAX_PAGE);
    let store = app.store.lock().unwrap_or_else(|e| e.into_inner());
    Json(store.queue(params.cursor.as_deref().filter(|c| !c.is_empty()), limit))
}

async fn stats(State(app): State<AppState>) -> Json<StoreStats> {
    let store = app.store.lock().unwrap_or_else(|e| e.into_inner());
    Json(store.stats())
}

async fn decide(
    State(app): State<AppState>,
    headers: HeaderMap,
    body: Result<Json<DecisionRequest>, JsonRejection>,
) -> Result<Json<DecisionResponse>, ApiError> {
    let given = headers
        .get(SECRET_HEADER)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("");
    if !secret_matches(given, &app.secret) {
        return Err(ApiError::new(
            StatusCode::UNAUTHORIZED,
            "UNAUTHORIZED",
            "missing or wrong review secret",
        ));
    }
    let Json(req) =
        body.map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "BAD_REQUEST", e.body_text()))?;
    if req.reviewer.trim().is_empty() {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "BAD_REQUEST",
            "reviewer is required",
        ));
    }
    let decision = Decision {
        kind: req.decision,
        manually_derived_correct: req.manually_derived_correct,
        note: req.note,
    };
    let store = app.store.clone();
    let applied = tokio::task::spawn_blocking(move || {
        let mut store = store.lock().unwrap_or_else(|e| e.into_inner());
        store.submit(&req.id, &decision, req.expected_version, req.reviewer.trim())
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "STORE_ERROR", e.to_string()))??;
    Ok(Json(DecisionResponse {
        id: applied.record.id,
        status: applied.record.status,
        version: applied.record.version,
        replayed: applied.replayed,
    }))
}

/// Builds the service. Decisions require `secret` in the
/// `X-Review-Secret` header. With `ui_dir`, static files are served from it
/// at `/`.
pub fn router(store: RecordStore, secret: &str, ui_dir: Option<PathBuf>) -> Router {
    let state = AppState {
        store: Arc::new(Mutex::new(store)),
        secret: Arc::from(secret),
    };
    let api = Router::new()
        .route("/api/queue", get(queue))
        .route("/api/decisions", post(decide))
        .route("/api/stats", get(stats))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(PLACEHOLDER_PAGE) })),
    }
}

/// Serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, app: Router) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("review service listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Origin, SentencePair};
    use crate::perturb::{Perturber, RuleResources};
    use crate::validate::{classify_candidate, ValidationRecord};
    use axum::body::Body;
    use axum::http::Request;
    use http_body_util::BodyExt;
    use tower::ServiceExt;

    fn store(dir: &std::path::Path, pending: usize, auto: usize) -> RecordStore {
        let res = RuleResources::builtin();
        let p = Perturber::new(&res);
        let mut records = Vec::new();
        for i in 0..pending + auto {
            let sp = SentencePair {
                id: format!("q:{i}"),
                source: "s".into(),
                target: "Das kam unerwartet.".into(),
                origin: Origin::Human,
                dataset_tag: "q".into(),
            };
            let h = p.polarity_affix(&sp).unwrap();
            let m = if i < pending {
                "Das war erwartet."
            } else {
                "Es kam unerwartet."
            };
            let c = classify_candidate(m, &h, &res).unwrap();
            records.push(ValidationRecord::new(&h, m, "eng", c));
        }
        RecordStore::create(dir, records).unwrap()
    }

    async fn call(app: &Router, req: Request<Body>) -> (StatusCode, serde_json::Value) {
        let resp = app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let value = serde_json::from_slice(&bytes).unwrap_or(serde_json::Value::Null);
        (status, value)
    }

    fn post(body: serde_json::Value, secret: &str) -> Request<Body> {
        Request::post("/api/decisions")
            .header("content-type", "application/json")
            .header(SECRET_HEADER, secret)
            .body(Body::from(body.to_string()))
            .unwrap()
    }

    #[tokio::test]
    async fn decision_paths() {
        let dir = tempfile::tempdir().unwrap();
        let app = router(store(dir.path(), 3, 7), "s3cret", None);

        let (st, stats) = call(&app, Request::get("/api/stats").body(Body::empty()).unwrap()).await;
        assert_eq!(st, StatusCode::OK);
        assert_eq!(stats["by_status"]["AUTO_ACCEPT"], 7);
        assert_eq!(stats["by_status"]["NEEDS_REVIEW"], 3);

        let accept = json!({"id": "polarity_affix_del/q:0", "decision": "accept", "expected_version": 0, "reviewer": "ann"});
        let (st, _) = call(&app, post(accept.clone(), "wrong")).await;
        assert_eq!(st, StatusCode::UNAUTHORIZED);
        let (st, body) = call(&app, post(accept.clone(), "s3cret")).await;
        assert_eq!(st, StatusCode::OK);
        assert_eq!(body["status"], "REVIEWED_ACCEPT");
        assert_eq!(body["version"], 1);
        // retry is idempotent
        let (st, body) = call(&app, post(accept, "s3cret")).await;
        assert_eq!((st, body["replayed"].clone()), (StatusCode::OK, json!(true)));

        let stale = json!({"id": "polarity_affix_del/q:0", "decision": "drop", "expected_version": 0, "reviewer": "bo"});
        assert_eq!(call(&app, post(stale, "s3cret")).await.0, StatusCode::CONFLICT);
        let unknown = json!({"id": "zz", "decision": "drop", "expected_version": 0, "reviewer": "bo"});
        assert_eq!(call(&app, post(unknown, "s3cret")).await.0, StatusCode::NOT_FOUND);
        let no_text = json!({"id": "polarity_affix_del/q:1", "decision": "mark_contrastive", "expected_version": 0, "reviewer": "bo"});
        let (st, body) = call(&app, post(no_text, "s3cret")).await;
        assert_eq!(
            (st, body["error"].clone()),
            (StatusCode::UNPROCESSABLE_ENTITY, json!("MISSING_CORRECTED_TEXT"))
        );
        let auto = json!({"id": "polarity_affix_del/q:5", "decision": "drop", "expected_version": 0, "reviewer": "bo"});
        assert_eq!(
            call(&app, post(auto, "s3cret")).await.0,
            StatusCode::UNPROCESSABLE_ENTITY
        );
        let garbage = json!({"id": "polarity_affix_del/q:1", "decision": "maybe"});
        assert_eq!(
            call(&app, post(garbage, "s3cret")).await.0,
            StatusCode::UNPROCESSABLE_ENTITY
        );

        let (_, stats) = call(&app, Request::get("/api/stats").body(Body::empty()).unwrap()).await;
        assert_eq!(stats["by_status"]["NEEDS_REVIEW"], 2);
        assert_eq!(stats["by_status"]["REVIEWED_ACCEPT"], 1);
        assert_eq!(stats["by_error_type"]["polarity_affix_del"]["REVIEWED_ACCEPT"], 1);
    }

    #[tokio::test]
    async fn queue_pages() {
        let dir = tempfile::tempdir().unwrap();
        let app = router(store(dir.path(), 3, 1), "k", None);
        let get = |uri: String| Request::get(uri).body(Body::empty()).unwrap();
        let (_, p1) = call(&app, get("/api/queue?limit=2".into())).await;
        assert_eq!(p1["items"].as_array().unwrap().len(), 2);
        let cursor = p1["next_cursor"].as_str().unwrap().to_string();
        let (_, p2) = call(&app, get(format!("/api/queue?cursor={cursor}&limit=2"))).await;
        assert_eq!(p2["items"].as_array().unwrap().len(), 1);
        assert!(p2["next_cursor"].is_null());
        assert_eq!(p2["items"][0]["machine_reference"], "Das war erwartet.");

        let resp = app.clone().oneshot(get("/".into())).await.unwrap();
        assert_eq!(resp.status(), StatusCode::OK);
    }

    #[tokio::test]
    async fn serves_ui_bundle() {
        let dir = tempfile::tempdir().unwrap();
        let ui = tempfile::tempdir().unwrap();
        std::fs::write(ui.path().join("index.html"), "<p>ui</p>").unwrap();
        let app = router(store(dir.path(), 0, 0), "k", Some(ui.path().to_path_buf()));
        let resp = app
            .oneshot(Request::get("/").body(Body::empty()).unwrap())
            .await
            .unwrap();
        assert_eq!(resp.status(), StatusCode::OK);
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        assert_eq!(&bytes[..], b"<p>ui</p>");
    }
}
