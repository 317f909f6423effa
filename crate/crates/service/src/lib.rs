//! HTTP session API over a shared, read-only dialog engine.
//!
//! Routes: `POST /session`, `POST /session/{id}/message`,
//! `GET /session/{id}/state`, `GET /kg/entity/{id}` and `GET /healthz`.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex as StdMutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lstp::data::UserProfile;
use lstp::dialog::{DialogState, Engine, StepOutcome};
use lstp::kg::{EntityId, KnowledgeGraph, Triple};
use rand::RngCore;
use serde::Serialize;
use serde_json::{json, Value};
use tokio::sync::Mutex;
use tower_http::cors::CorsLayer;

pub const PORT_ENV: &str = "LSTP_PORT";
pub const DEFAULT_PORT: u16 = 8080;
pub const ENTITY_TRIPLE_LIMIT: usize = 20;

#[derive(Clone, Copy, Debug)]
pub struct ServiceConfig {
    /// Idle time after which a session is dropped.
    pub ttl: Duration,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            ttl: Duration::from_secs(3600),
        }
    }
}

struct Session {
    state: DialogState,
    last_active: Instant,
}

struct AppState {
    engine: Engine,
    config: ServiceConfig,
    sessions: StdMutex<HashMap<String, Arc<Mutex<Session>>>>,
}

impl AppState {
    fn purge(&self, now: Instant) {
        let ttl = self.config.ttl;
        self.sessions.lock().expect("session map").retain(|_, s| match s.try_lock() {
            Ok(s) => now.duration_since(s.last_active) < ttl,
            Err(_) => true,
        });
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.purge(Instant::now());
        self.sessions
            .lock()
            .expect("session map")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown session {id}")))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    field: Option<String>,
}

impl ApiError {
    fn bad_request(message: impl Into<String>, field: Option<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
            field,
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            message: message.into(),
            field: None,
        }
    }

    fn internal(e: lstp::Error) -> Self {
        ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: e.to_string(),
            field: None,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if let Some(f) = self.field {
            body["field"] = Value::String(f);
        }
        (self.status, Json(body)).into_response()
    }
}

#[derive(Serialize)]
struct EntityView<'a> {
    id: EntityId,
    name: &'a str,
    kind: lstp::kg::EntityKind,
}

fn entity_view(g: &KnowledgeGraph, id: EntityId) -> EntityView<'_> {
    let e = &g.entities()[id.index()];
    EntityView {
        id,
        name: &e.name,
        kind: e.kind,
    }
}

fn triple_names(g: &KnowledgeGraph, t: &Triple) -> [String; 3] {
    [g.name(t.head).to_string(), g.relation_name(t.rel).to_string(), g.name(t.tail).to_string()]
}

/// Builds the router with permissive CORS for the browser client.
pub fn router(engine: Engine, config: ServiceConfig) -> Router {
    let state = Arc::new(AppState {
        engine,
        config,
        sessions: StdMutex::new(HashMap::new()),
    });
    Router::new()
        .route("/healthz", get(healthz))
        .route("/session", post(create_session))
        .route("/session/{id}/message", post(post_message))
        .route("/session/{id}/state", get(get_state))
        .route("/kg/entity/{id}", get(get_entity))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// `--port` wins over `LSTP_PORT`, which wins over the default.
pub fn resolve_port(flag: Option<u16>) -> Result<u16, String> {
    if let Some(p) = flag {
        return Ok(p);
    }
    match std::env::var(PORT_ENV) {
        Ok(v) => v.parse().map_err(|_| format!("{PORT_ENV}={v} is not a port number")),
        Err(_) => Ok(DEFAULT_PORT),
    }
}

/// Serves until the process is stopped.
pub async fn serve(engine: Engine, config: ServiceConfig, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(engine, config)).await
}

async fn healthz() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

fn new_session_id() -> String {
    let mut bytes = [0u8; 16];
    rand::rng().fill_bytes(&mut bytes);
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn parse_body(body: &Bytes) -> Result<Value, ApiError> {
    if body.iter().all(|b| b.is_ascii_whitespace()) {
        return Ok(json!({}));
    }
    let v: Value = serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed JSON: {e}"), None))?;
    if !v.is_object() {
        return Err(ApiError::bad_request("body must be a JSON object", None));
    }
    Ok(v)
}

fn parse_profile(g: &KnowledgeGraph, body: &Value) -> Result<UserProfile, ApiError> {
    let user_id = match body.get("user_id") {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(ApiError::bad_request("user_id must be a string", Some("user_id".into()))),
    };
    let entries = match body.get("profile") {
        None | Some(Value::Null) => return Ok(UserProfile::new(user_id, Vec::new())),
        Some(Value::Array(a)) => a,
        Some(_) => return Err(ApiError::bad_request("profile must be a list of [entity, timestamp] pairs", Some("profile".into()))),
    };
    let mut interactions = Vec::with_capacity(entries.len());
    for (i, entry) in entries.iter().enumerate() {
        let pair = entry.as_array().filter(|a| a.len() == 2);
        let Some(pair) = pair else {
            return Err(ApiError::bad_request("expected an [entity, timestamp] pair", Some(format!("profile[{i}]"))));
        };
        let e = pair[0]
            .as_u64()
            .and_then(|x| u32::try_from(x).ok())
            .map(EntityId)
            .filter(|&e| g.check_entity(e).is_ok())
            .ok_or_else(|| ApiError::bad_request(format!("invalid entity id {}", pair[0]), Some(format!("profile[{i}][0]"))))?;
        let ts = pair[1]
            .as_u64()
            .ok_or_else(|| ApiError::bad_request(format!("invalid timestamp {}", pair[1]), Some(format!("profile[{i}][1]"))))?;
        if interactions.last().is_some_and(|&(_, prev)| ts < prev) {
            return Err(ApiError::bad_request("timestamps must be non-decreasing", Some(format!("profile[{i}][1]"))));
        }
        interactions.push((e, ts));
    }
    Ok(UserProfile::new(user_id, interactions))
}

async fn create_session(State(app): State<Arc<AppState>>, body: Bytes) -> Result<(StatusCode, Json<Value>), ApiError> {
    let body = parse_body(&body)?;
    let profile = parse_profile(&app.engine.graph, &body)?;
    let id = new_session_id();
    let session = Session {
        state: DialogState::new(id.clone(), profile),
        last_active: Instant::now(),
    };
    app.purge(Instant::now());
    app.sessions.lock().expect("session map").insert(id.clone(), Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(json!({ "session_id": id }))))
}

fn outcome_json(g: &KnowledgeGraph, out: &StepOutcome) -> Value {
    json!({
        "reply": out.action.response_text,
        "action": out.action.kind,
        "entity": entity_view(g, out.action.entity),
        "knowledge": out.action.knowledge.iter().map(|t| triple_names(g, t)).collect::<Vec<_>>(),
        "linked_entities": out.linked.iter().map(|&e| entity_view(g, e)).collect::<Vec<_>>(),
        "debug": {
            "ltp_target": entity_view(g, out.ltp_target),
            "stp_top": entity_view(g, out.stp_top),
        },
    })
}

async fn post_message(State(app): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let session = app.session(&id)?;
    let body = parse_body(&body)?;
    let text = match body.get("text") {
        Some(Value::String(s)) if !s.trim().is_empty() => s.clone(),
        Some(Value::String(_)) | None => return Err(ApiError::bad_request("text must be a non-empty string", Some("text".into()))),
        Some(_) => return Err(ApiError::bad_request("text must be a string", Some("text".into()))),
    };
    let mut s = session.lock().await;
    let out = app.engine.step(&mut s.state, &text).map_err(ApiError::internal)?;
    s.last_active = Instant::now();
    Ok(Json(outcome_json(&app.engine.graph, &out)))
}

async fn get_state(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let session = app.session(&id)?;
    let s = session.lock().await;
    let g = &app.engine.graph;
    Ok(Json(json!({
        "session_id": s.state.session_id,
        "profile": s.state.profile.interactions,
        "turns": s.state.turns,
        "convo_entities": s.state.convo_entities,
        "trace": s.state.trace,
        "prev_grounding": s.state.prev_grounding.map(|e| entity_view(g, e)),
    })))
}

async fn get_entity(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let g = &app.engine.graph;
    let e = id
        .parse::<u32>()
        .ok()
        .map(EntityId)
        .filter(|&e| g.check_entity(e).is_ok())
        .ok_or_else(|| ApiError::not_found(format!("unknown entity {id}")))?;
    let triples = g.incident_triples(e).map_err(ApiError::internal)?;
    let view = entity_view(g, e);
    Ok(Json(json!({
        "id": view.id,
        "name": view.name,
        "kind": view.kind,
        "triples": triples.iter().take(ENTITY_TRIPLE_LIMIT).map(|t| triple_names(g, t)).collect::<Vec<_>>(),
    })))
}
