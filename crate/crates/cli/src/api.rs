//! Local HTTP API under `/api/v1`.

use std::collections::{HashMap, VecDeque};
use std::convert::Infallible;
use std::sync::{Arc, Mutex};

use axum::body::{Body, Bytes};
use axum::extract::State;
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::de::DeserializeOwned;
use tokio::sync::mpsc;
use tokio_stream::wrappers::ReceiverStream;
use tokio_stream::StreamExt;

use tedm_core::metrics::{read_snapshot, HolderDistribution};
use tedm_core::sim::{run_scenario, run_scenario_with, ScenarioReport};
use tedm_core::spec::{json_schema, parse_spec_as, SpecFormat};

use crate::commands::{self, Outcome, PreparedRun, SimulateRequest};

pub const CONTENT_HASH: &str = "x-content-hash";
const NDJSON: &str = "application/x-ndjson";

type Entries = (HashMap<String, Arc<ScenarioReport>>, VecDeque<String>);

/// Finished runs keyed by content hash, oldest evicted first.
#[derive(Debug)]
pub struct RunCache {
    capacity: usize,
    inner: Mutex<Entries>,
}

impl RunCache {
    pub fn new(capacity: usize) -> RunCache {
        RunCache {
            capacity,
            inner: Mutex::new((HashMap::new(), VecDeque::new())),
        }
    }

    pub fn get(&self, key: &str) -> Option<Arc<ScenarioReport>> {
        self.inner.lock().unwrap().0.get(key).cloned()
    }

    pub fn insert(&self, key: String, report: Arc<ScenarioReport>) {
        if self.capacity == 0 {
            return;
        }
        let mut guard = self.inner.lock().unwrap();
        let (map, order) = &mut *guard;
        if map.insert(key.clone(), report).is_none() {
            order.push_back(key);
        }
        while order.len() > self.capacity {
            if let Some(old) = order.pop_front() {
                map.remove(&old);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct AppState {
    pub cache: Arc<RunCache>,
}

impl Default for AppState {
    fn default() -> Self {
        AppState {
            cache: Arc::new(RunCache::new(64)),
        }
    }
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route(
            "/health",
            get(|| async { axum::Json(serde_json::json!({ "status": "ok" })) }),
        )
        .route("/validate", post(validate))
        .route("/metrics", post(metrics))
        .route("/simulate", post(simulate))
        .route("/compare", post(compare))
        .route("/recommend", post(recommend))
        .route("/presets", get(|| async { respond(commands::presets()) }))
        .route("/matrix", get(|| async { respond(commands::matrix()) }))
        .route("/schema", get(|| async { axum::Json(json_schema()) }));
    Router::new().nest("/api/v1", api).with_state(state)
}

fn respond(outcome: Outcome) -> Response {
    let status = StatusCode::from_u16(outcome.status.http_status())
        .unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    if !outcome.is_ok() {
        tracing::debug!(status = status.as_u16(), body = %outcome.body, "request refused");
    }
    (status, axum::Json(outcome.body)).into_response()
}

/// Responds with the outcome, tagged with the hash of the request body.
fn respond_to(body: &Bytes, outcome: Outcome) -> Response {
    let mut response = respond(outcome);
    let hash = commands::hash_bytes(body);
    response.headers_mut().insert(
        CONTENT_HASH,
        HeaderValue::from_str(&hash).expect("hex digest is a valid header"),
    );
    response
}

fn body_text(body: &Bytes) -> Result<&str, Outcome> {
    std::str::from_utf8(body)
        .map_err(|_| Outcome::error(commands::Status::Invalid, "schema", "body is not UTF-8"))
}

fn parse_json<T: DeserializeOwned>(body: &Bytes) -> Result<T, Outcome> {
    let text = body_text(body)?;
    parse_spec_as::<T>(text, SpecFormat::Json)
        .map(|(v, _)| v)
        .map_err(Outcome::from)
}

fn content_type(headers: &HeaderMap) -> &str {
    headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("")
}

async fn validate(body: Bytes) -> Response {
    let outcome = body_text(&body).map_or_else(|e| e, commands::validate);
    respond_to(&body, outcome)
}

async fn metrics(headers: HeaderMap, body: Bytes) -> Response {
    let result = if content_type(&headers).starts_with("text/csv") {
        read_snapshot(&body[..])
            .map(|d| (d, commands::default_top_k()))
            .map_err(Outcome::from)
    } else {
        parse_json::<commands::MetricsRequest>(&body).and_then(|r| {
            Ok((
                HolderDistribution::new(r.entries).map_err(Outcome::from)?,
                r.top_k,
            ))
        })
    };
    let outcome = result.map_or_else(|e| e, |(dist, k)| commands::metrics(&dist, k));
    respond_to(&body, outcome)
}

async fn compare(body: Bytes) -> Response {
    let outcome = parse_json::<commands::CompareRequest>(&body)
        .map_or_else(|e| e, |r| commands::compare_parsed(&r.left, &r.right));
    respond_to(&body, outcome)
}

async fn recommend(body: Bytes) -> Response {
    let req = if body.iter().all(u8::is_ascii_whitespace) {
        Ok(commands::RecommendRequest::default())
    } else {
        parse_json::<commands::RecommendRequest>(&body)
    };
    respond_to(&body, req.map_or_else(|e| e, |r| commands::recommend(&r)))
}

fn wants_stream(headers: &HeaderMap, req: &SimulateRequest) -> bool {
    req.stream
        || headers
            .get(header::ACCEPT)
            .and_then(|v| v.to_str().ok())
            .is_some_and(|v| v.contains(NDJSON))
}

async fn simulate(State(state): State<AppState>, headers: HeaderMap, body: Bytes) -> Response {
    let req = match parse_json::<SimulateRequest>(&body) {
        Ok(r) => r,
        Err(e) => return respond_to(&body, e),
    };
    let (stream, full) = (wants_stream(&headers, &req), req.full);
    let run = match commands::prepare_run(req, None) {
        Ok(r) => r,
        Err(e) => return respond_to(&body, e),
    };
    let hash = HeaderValue::from_str(&run.content_hash).expect("hex digest is a valid header");
    let mut response = if stream {
        stream_run(state, run, full)
    } else {
        run_once(state, run, full).await
    };
    response.headers_mut().insert(CONTENT_HASH, hash);
    response
}

async fn run_once(state: AppState, run: PreparedRun, full: bool) -> Response {
    if let Some(hit) = state.cache.get(&run.content_hash) {
        tracing::info!(hash = %run.content_hash, "simulation cache hit");
        return respond(commands::simulation(&hit, &run.content_hash, full));
    }
    let key = run.content_hash.clone();
    let started = std::time::Instant::now();
    let joined = tokio::task::spawn_blocking(move || run_scenario(&run.spec, &run.scenario)).await;
    match joined {
        Ok(Ok(report)) => {
            tracing::info!(hash = %key, elapsed_ms = started.elapsed().as_millis() as u64, "simulation finished");
            let report = Arc::new(report);
            state.cache.insert(key.clone(), report.clone());
            respond(commands::simulation(&report, &key, full))
        }
        Ok(Err(e)) => respond(e.into()),
        Err(e) => respond(Outcome::internal(format!("simulation task failed: {e}"))),
    }
}

fn line(v: serde_json::Value) -> Bytes {
    let mut s = v.to_string();
    s.push('\n');
    Bytes::from(s)
}

fn stream_run(state: AppState, run: PreparedRun, full: bool) -> Response {
    let (tx, rx) = mpsc::channel::<Bytes>(64);
    let key = run.content_hash.clone();
    if let Some(hit) = state.cache.get(&key) {
        tokio::spawn(async move {
            for e in &hit.epochs {
                if tx.send(line(commands::epoch_line(e, full))).await.is_err() {
                    return;
                }
            }
            let _ = tx.send(line(commands::summary_line(&hit, &key))).await;
        });
    } else {
        tokio::task::spawn_blocking(move || {
            let out = tx.clone();
            let result = run_scenario_with(&run.spec, &run.scenario, |e| {
                // a closed receiver only means the client went away
                let _ = out.blocking_send(line(commands::epoch_line(e, full)));
            });
            let last = match result {
                Ok(report) => {
                    let report = Arc::new(report);
                    state.cache.insert(key.clone(), report.clone());
                    commands::summary_line(&report, &key)
                }
                Err(e) => commands::error_line(&e.into()),
            };
            let _ = tx.blocking_send(line(last));
        });
    }
    let body = Body::from_stream(ReceiverStream::new(rx).map(Ok::<_, Infallible>));
    ([(header::CONTENT_TYPE, NDJSON)], body).into_response()
}
