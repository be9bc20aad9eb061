//! Local HTTP session API.
//!
//! Assertions on one session run one at a time; queries work on a snapshot of
//! the problem taken when they arrive, so they never wait for an assertion.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::Value;

use crate::problem::{syntax_error, Problem};
use crate::session::{answer_json, evaluate_assertion, ApiError, ApiResult, Assertion, Session};

struct Slot {
    writer: tokio::sync::Mutex<()>,
    session: Mutex<Session>,
}

#[derive(Default)]
struct AppState {
    sessions: RwLock<HashMap<String, Arc<Slot>>>,
    next: AtomicU64,
    initial: Option<Problem>,
}

type Reply = (StatusCode, Json<Value>);

fn status(e: &ApiError) -> StatusCode {
    match e.code.as_str() {
        "parse" | "invalid-input" => StatusCode::BAD_REQUEST,
        "not-found" => StatusCode::NOT_FOUND,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

fn reply(result: ApiResult) -> Reply {
    match result {
        Ok(v) => (StatusCode::OK, Json(v)),
        Err(e) => (status(&e), Json(e.payload())),
    }
}

fn body_json(body: &Bytes) -> ApiResult<Value> {
    serde_json::from_slice(body).map_err(|e| syntax_error("body", &e).into())
}

fn slot(state: &AppState, id: &str) -> ApiResult<Arc<Slot>> {
    state
        .sessions
        .read()
        .expect("session table lock")
        .get(id)
        .cloned()
        .ok_or_else(|| ApiError::new("not-found", format!("no session `{id}`")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.unwrap_or_else(|e| Err(ApiError::new("internal", e.to_string())))
}

async fn create(State(state): State<Arc<AppState>>, body: Bytes) -> Reply {
    let id = format!("s{}", state.next.fetch_add(1, Ordering::Relaxed) + 1);
    let made = if body.iter().all(u8::is_ascii_whitespace) {
        state
            .initial
            .clone()
            .map(|p| Session::new(id.clone(), p))
            .ok_or_else(|| ApiError::new("parse", "a problem file body is required"))
    } else {
        let sid = id.clone();
        match body_json(&body) {
            Ok(v) => blocking(move || Session::create(sid, &v)).await,
            Err(e) => Err(e),
        }
    };
    reply(made.map(|session| {
        let view = session.state();
        let slot = Slot { writer: tokio::sync::Mutex::new(()), session: Mutex::new(session) };
        state.sessions.write().expect("session table lock").insert(id, Arc::new(slot));
        view
    }))
}

async fn assert(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> Reply {
    let slot = match slot(&state, &id) {
        Ok(s) => s,
        Err(e) => return reply(Err(e)),
    };
    let _writer = slot.writer.lock().await;
    let request = body_json(&body);
    let snapshot = slot.session.lock().expect("session lock").problem().clone();
    let outcome = match &request {
        Ok(v) => {
            let v = v.clone();
            blocking(move || {
                let a: Assertion = serde_json::from_value(v).map_err(|e| ApiError::new("parse", e.to_string()))?;
                evaluate_assertion(&snapshot, &a)
            })
            .await
        }
        Err(e) => Err(e.clone()),
    };
    let result = slot.session.lock().expect("session lock").commit(request.unwrap_or(Value::Null), outcome);
    match result {
        Ok(v) if v["accepted"] == Value::Bool(false) => (StatusCode::CONFLICT, Json(v)),
        other => reply(other),
    }
}

async fn query(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> Reply {
    let slot = match slot(&state, &id) {
        Ok(s) => s,
        Err(e) => return reply(Err(e)),
    };
    let request = body_json(&body);
    let snapshot = slot.session.lock().expect("session lock").problem().clone();
    let result = match &request {
        Ok(v) => {
            let v = v.clone();
            blocking(move || answer_json(&snapshot, &v)).await
        }
        Err(e) => Err(e.clone()),
    };
    slot.session.lock().expect("session lock").record("query", request.unwrap_or(Value::Null), &result);
    reply(result)
}

async fn undo(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Reply {
    reply(slot(&state, &id).map(|s| s.session.lock().expect("session lock").undo()))
}

async fn view(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Reply {
    reply(slot(&state, &id).map(|s| s.session.lock().expect("session lock").state()))
}

async fn region(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Reply {
    let snapshot = match slot(&state, &id) {
        Ok(s) => s.session.lock().expect("session lock").problem().clone(),
        Err(e) => return reply(Err(e)),
    };
    reply(blocking(move || crate::session::region(&snapshot)).await)
}

/// Routes; `initial` seeds sessions created with an empty body.
pub fn router(initial: Option<Problem>) -> Router {
    let state = Arc::new(AppState { initial, ..AppState::default() });
    Router::new()
        .route("/session", post(create))
        .route("/session/{id}/assert", post(assert))
        .route("/session/{id}/query", post(query))
        .route("/session/{id}/undo", post(undo))
        .route("/session/{id}/state", get(view))
        .route("/session/{id}/region", get(region))
        .with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, initial: Option<Problem>) -> std::io::Result<()> {
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(initial)).await
}
