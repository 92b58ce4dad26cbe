//! HTTP API over the orchestrator.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use persuasion_core::acts::Side;
use persuasion_core::corpus::AnnotatedConversation;
use persuasion_core::orchestrator::{Orchestrator, OrchestratorError, Session, SessionStatus, SystemTurn};
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use crate::records::RecordStore;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnBody {
    pub response_part: Option<String>,
    pub response_source: String,
    pub agenda_part: String,
    pub agenda_act: String,
    pub full_text: String,
    pub turn_number: usize,
}

impl From<&SystemTurn> for TurnBody {
    fn from(t: &SystemTurn) -> Self {
        Self {
            response_part: t.response_part.clone(),
            response_source: serde_json::to_value(t.response_source)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default(),
            agenda_part: t.agenda_part.clone(),
            agenda_act: t.agenda_act.name.clone(),
            full_text: t.full_text.clone(),
            turn_number: t.turn_number,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub turn: TurnBody,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MessageRequest {
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MessageReply {
    pub turn: TurnBody,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Ended {
    pub record_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptLine {
    pub role: Side,
    pub text: String,
    pub timestamp_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub session_id: String,
    pub status: SessionStatus,
    pub user_turns: usize,
    pub lines: Vec<TranscriptLine>,
}

impl Transcript {
    fn of_session(s: &Session) -> Self {
        Self {
            session_id: s.id.clone(),
            status: s.status,
            user_turns: s.user_turns,
            lines: s
                .history
                .iter()
                .map(|h| TranscriptLine { role: h.role, text: h.text.clone(), timestamp_ms: Some(h.timestamp_ms) })
                .collect(),
        }
    }

    fn of_record(r: &AnnotatedConversation) -> Self {
        Self {
            session_id: r.id.clone(),
            status: SessionStatus::Ended,
            user_turns: r.turns.iter().filter(|t| t.role == Side::Persuadee).count(),
            lines: r
                .turns
                .iter()
                .map(|t| TranscriptLine { role: t.role, text: t.text(), timestamp_ms: None })
                .collect(),
        }
    }
}

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

impl From<OrchestratorError> for ApiError {
    fn from(e: OrchestratorError) -> Self {
        let status = match e {
            OrchestratorError::SessionEnded | OrchestratorError::TurnLimit(_) => StatusCode::CONFLICT,
            OrchestratorError::EmptyMessage => StatusCode::BAD_REQUEST,
            OrchestratorError::Unavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
            OrchestratorError::BadConfig(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
}

fn not_found(id: &str) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, format!("unknown session {id}"))
}

struct Slot {
    session: Session,
    last_seen: Instant,
    persisted: bool,
}

type SlotRef = Arc<tokio::sync::Mutex<Slot>>;

pub struct AppState {
    orchestrator: Arc<Orchestrator>,
    sessions: Mutex<HashMap<String, SlotRef>>,
    store: RecordStore,
    ttl: Duration,
    generation: Semaphore,
}

impl AppState {
    pub fn new(orchestrator: Orchestrator, store: RecordStore, ttl: Duration, max_in_flight: usize) -> Arc<Self> {
        Arc::new(Self {
            orchestrator: Arc::new(orchestrator),
            sessions: Mutex::new(HashMap::new()),
            store,
            ttl,
            generation: Semaphore::new(max_in_flight.max(1)),
        })
    }

    pub fn store(&self) -> &RecordStore {
        &self.store
    }

    fn slot(&self, id: &str) -> Option<SlotRef> {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner()).get(id).cloned()
    }

    fn persist(&self, slot: &mut Slot) -> Result<String, ApiError> {
        let record = self.orchestrator.end_session(&mut slot.session);
        if !slot.persisted {
            self.store.append(&record).map_err(internal)?;
            slot.persisted = true;
        }
        Ok(record.id)
    }

    /// Ends and persists sessions idle for longer than the TTL. Returns how many were evicted.
    pub async fn evict_idle(&self) -> usize {
        let candidates: Vec<(String, SlotRef)> =
            self.sessions.lock().unwrap_or_else(|e| e.into_inner()).iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        let mut evicted = 0;
        for (id, slot) in candidates {
            let Ok(mut guard) = slot.try_lock() else { continue };
            if guard.last_seen.elapsed() < self.ttl {
                continue;
            }
            if let Err(e) = self.persist(&mut guard) {
                log::error!("failed to persist evicted session {id}: {}", e.1);
                continue;
            }
            self.sessions.lock().unwrap_or_else(|e| e.into_inner()).remove(&id);
            evicted += 1;
        }
        evicted
    }

    /// Ends and persists every live session.
    pub async fn flush_all(&self) {
        let all: Vec<SlotRef> = self.sessions.lock().unwrap_or_else(|e| e.into_inner()).values().cloned().collect();
        for slot in all {
            let mut guard = slot.lock().await;
            if let Err(e) = self.persist(&mut guard) {
                log::error!("failed to persist session {}: {}", guard.session.id, e.1);
            }
        }
    }
}

async fn create_session(State(state): State<Arc<AppState>>) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let _permit = state.generation.acquire().await.map_err(internal)?;
    let orch = state.orchestrator.clone();
    let (session, turn) = tokio::task::spawn_blocking(move || orch.start_session()).await.map_err(internal)??;
    let id = session.id.clone();
    let slot = Slot { session, last_seen: Instant::now(), persisted: false };
    state.sessions.lock().unwrap_or_else(|e| e.into_inner()).insert(id.clone(), Arc::new(tokio::sync::Mutex::new(slot)));
    Ok((StatusCode::CREATED, Json(SessionCreated { session_id: id, turn: TurnBody::from(&turn) })))
}

async fn post_message(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(body): Json<MessageRequest>,
) -> Result<Json<MessageReply>, ApiError> {
    let slot = state.slot(&id).ok_or_else(|| not_found(&id))?;
    let mut guard = slot.lock_owned().await;
    guard.last_seen = Instant::now();
    let max = state.orchestrator.config().max_user_turns;
    if guard.session.status == SessionStatus::Ended {
        return Err(OrchestratorError::SessionEnded.into());
    }
    if !guard.session.can_accept_message(max) {
        return Err(OrchestratorError::TurnLimit(max).into());
    }
    let _permit = state.generation.acquire().await.map_err(internal)?;
    let orch = state.orchestrator.clone();
    let turn = tokio::task::spawn_blocking(move || orch.handle_user_message(&mut guard.session, &body.text))
        .await
        .map_err(internal)??;
    Ok(Json(MessageReply { turn: TurnBody::from(&turn) }))
}

async fn end_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Ended>, ApiError> {
    match state.slot(&id) {
        Some(slot) => {
            let mut guard = slot.lock().await;
            guard.last_seen = Instant::now();
            Ok(Json(Ended { record_id: state.persist(&mut guard)? }))
        }
        None => match state.store.find(&id).map_err(internal)? {
            Some(record) => Ok(Json(Ended { record_id: record.id })),
            None => Err(not_found(&id)),
        },
    }
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Transcript>, ApiError> {
    if let Some(slot) = state.slot(&id) {
        let guard = slot.lock().await;
        return Ok(Json(Transcript::of_session(&guard.session)));
    }
    match state.store.find(&id).map_err(internal)? {
        Some(record) => Ok(Json(Transcript::of_record(&record))),
        None => Err(not_found(&id)),
    }
}

async fn health(State(state): State<Arc<AppState>>) -> Result<Json<serde_json::Value>, ApiError> {
    state.orchestrator.health()?;
    Ok(Json(serde_json::json!({ "status": "ok" })))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/session", post(create_session))
        .route("/session/{id}/message", post(post_message))
        .route("/session/{id}/end", post(end_session))
        .route("/session/{id}", get(get_session))
        .route("/health", get(health))
        .with_state(state)
}

/// Serves until ctrl-c, evicting idle sessions periodically and persisting all live
/// sessions on shutdown.
pub async fn serve(state: Arc<AppState>, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    let sweeper = {
        let state = state.clone();
        let period = (state.ttl / 4).clamp(Duration::from_secs(1), Duration::from_secs(60));
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(period);
            loop {
                tick.tick().await;
                let n = state.evict_idle().await;
                if n > 0 {
                    log::info!("evicted {n} idle sessions");
                }
            }
        })
    };
    let result = axum::serve(listener, router(state.clone()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await;
    sweeper.abort();
    state.flush_all().await;
    result
}
