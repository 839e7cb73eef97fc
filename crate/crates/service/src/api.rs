use std::collections::BTreeMap;
use std::convert::Infallible;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::Json;
use futures_util::stream::{self, Stream};
use serde::{Deserialize, Serialize};
use serde_json::json;
use taskweave_core::allocation::AllocMode;
use taskweave_core::llm::{ChatBackend, LiveBackend, MockBackend, MockScript, ReplayBackend};
use taskweave_core::pipeline::{Budgets, Event, FeedbackDecision, Phase, PipelineError, Session, SessionConfig};

use crate::store::{self, ServiceConfig, Slot, Snapshot};

/// Shared server state.
pub struct AppState {
    pub(crate) config: ServiceConfig,
    pub(crate) sessions: RwLock<BTreeMap<String, Arc<Slot>>>,
    next_id: AtomicU64,
}

impl AppState {
    /// Reads back persisted logs when the config names a directory.
    pub fn new(config: ServiceConfig) -> std::io::Result<Arc<AppState>> {
        let mut sessions = BTreeMap::new();
        if let Some(dir) = &config.persist_dir {
            for slot in store::recover(dir, &config.scenes)? {
                sessions.insert(slot.id.clone(), Arc::new(slot));
            }
        }
        Ok(Arc::new(AppState {
            config,
            sessions: RwLock::new(sessions),
            next_id: AtomicU64::new(1),
        }))
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("no session {id}")))
    }

    fn active(&self) -> usize {
        self.sessions
            .read()
            .unwrap()
            .values()
            .filter(|s| !s.snapshot().phase.is_terminal() && s.session.is_some())
            .count()
    }

    fn fresh_id(&self) -> String {
        let sessions = self.sessions.read().unwrap();
        loop {
            let id = format!("s{}", self.next_id.fetch_add(1, Ordering::Relaxed));
            if !sessions.contains_key(&id) {
                return id;
            }
        }
    }
}

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    NotFound(String),
    Conflict(String),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, message) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(json!({ "error": message }))).into_response()
    }
}

fn body<T: for<'de> Deserialize<'de>>(bytes: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::BadRequest(format!("invalid body: {e}")))
}

pub async fn healthz() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

pub async fn list_scenes(State(app): State<Arc<AppState>>) -> Json<Vec<String>> {
    Json(app.config.scenes.keys().cloned().collect())
}

pub async fn get_scene(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    match app.config.scenes.get(&id) {
        Some(s) => Json(s).into_response(),
        None => ApiError::NotFound(format!("no scene {id}")).into_response(),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    #[default]
    Mock,
    Replay,
    Live,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CreateSession {
    pub scene_id: String,
    pub task: String,
    #[serde(default)]
    pub backend: BackendChoice,
    #[serde(default)]
    pub budgets: Option<Budgets>,
    #[serde(default)]
    pub alloc: Option<AllocMode>,
    /// Replies for the mock backend. Defaults to the suite entry with the same scene and task.
    #[serde(default)]
    pub mock: Option<MockScript>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Created {
    pub session_id: String,
}

fn backend(config: &ServiceConfig, req: &CreateSession) -> Result<Arc<dyn ChatBackend>, ApiError> {
    match req.backend {
        BackendChoice::Mock => {
            let script = match &req.mock {
                Some(m) => m.clone(),
                None => config
                    .suite
                    .entries
                    .iter()
                    .find(|e| e.scene_id == req.scene_id && e.instruction.trim() == req.task.trim())
                    .map(|e| e.mock.clone())
                    .ok_or_else(|| {
                        ApiError::BadRequest("no mock script for this scene and task; pass one in `mock`".into())
                    })?,
            };
            Ok(Arc::new(MockBackend::new(script)))
        }
        BackendChoice::Replay => config
            .transcript
            .clone()
            .map(|t| Arc::new(ReplayBackend::new(t)) as Arc<dyn ChatBackend>)
            .ok_or_else(|| ApiError::BadRequest("the server has no transcript to replay".into())),
        BackendChoice::Live => {
            let live = config
                .live
                .clone()
                .ok_or_else(|| ApiError::BadRequest("the server has no live backend configured".into()))?;
            LiveBackend::from_env(live)
                .map(|b| Arc::new(b) as Arc<dyn ChatBackend>)
                .map_err(|e| ApiError::BadRequest(e.to_string()))
        }
    }
}

pub async fn create_session(State(app): State<Arc<AppState>>, bytes: Bytes) -> Result<Response, ApiError> {
    let req: CreateSession = body(&bytes)?;
    let scene = app
        .config
        .scenes
        .get(&req.scene_id)
        .cloned()
        .ok_or_else(|| ApiError::BadRequest(format!("unknown scene {}", req.scene_id)))?;
    if req.task.trim().is_empty() {
        return Err(ApiError::BadRequest("task must not be empty".into()));
    }
    let chat = backend(&app.config, &req)?;
    if app.active() >= app.config.max_sessions {
        return Err(ApiError::Conflict(format!(
            "{} sessions are running; try again later",
            app.config.max_sessions
        )));
    }

    let id = app.fresh_id();
    let (log, sink) =
        store::new_log(app.config.persist_dir.as_deref(), &id).map_err(|e| ApiError::Internal(e.to_string()))?;
    let config = SessionConfig {
        budgets: req.budgets.unwrap_or_default(),
        alloc: req.alloc.unwrap_or(AllocMode::RuleBased),
        profiles: Arc::clone(&app.config.profiles),
        templates: Arc::clone(&app.config.templates),
        clock: Arc::clone(&app.config.clock),
        ..SessionConfig::default()
    };
    let created_at = app.config.clock.now();
    let session = Session::with_sink(&req.task, scene, chat, config, Some(sink)).map_err(|e| match e {
        PipelineError::EmptyInstruction => ApiError::BadRequest(e.to_string()),
        e => ApiError::Internal(e.to_string()),
    })?;
    let slot = Arc::new(Slot {
        snapshot: RwLock::new(Arc::new(Snapshot::of_session(&id, &created_at, &session))),
        id: id.clone(),
        created_at,
        log,
        session: Some(Mutex::new(session)),
        command: Arc::new(tokio::sync::Mutex::new(())),
    });
    let guard = Arc::clone(&slot.command).lock_owned().await;
    app.sessions.write().unwrap().insert(id.clone(), Arc::clone(&slot));
    tokio::task::spawn_blocking(move || {
        slot.drive();
        drop(guard);
    });
    tracing::info!(session = %id, "session created");
    Ok((
        StatusCode::CREATED,
        [(header::LOCATION, format!("/sessions/{id}"))],
        Json(Created { session_id: id }),
    )
        .into_response())
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Summary {
    pub id: String,
    pub scene_id: String,
    pub instruction: String,
    pub phase: Phase,
    pub created_at: String,
    pub read_only: bool,
}

pub async fn list_sessions(State(app): State<Arc<AppState>>) -> Json<Vec<Summary>> {
    let sessions = app.sessions.read().unwrap();
    Json(
        sessions
            .values()
            .map(|s| {
                let snap = s.snapshot();
                Summary {
                    id: snap.id.clone(),
                    scene_id: snap.scene_id.clone(),
                    instruction: snap.instruction.clone(),
                    phase: snap.phase,
                    created_at: snap.created_at.clone(),
                    read_only: snap.read_only,
                }
            })
            .collect(),
    )
}

pub async fn get_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Snapshot>, ApiError> {
    Ok(Json((*app.slot(&id)?.snapshot()).clone()))
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Feedback {
    #[serde(flatten)]
    pub decision: FeedbackDecision,
    /// The snapshot turn this answers. Defaults to the turn current on arrival.
    #[serde(default)]
    pub turn: Option<u64>,
}

pub async fn post_feedback(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    bytes: Bytes,
) -> Result<Response, ApiError> {
    let slot = app.slot(&id)?;
    let fb: Feedback = body(&bytes)?;
    if let FeedbackDecision::Revise { text } = &fb.decision {
        if text.trim().is_empty() {
            return Err(ApiError::BadRequest(PipelineError::EmptyFeedback.to_string()));
        }
    }
    if slot.session.is_none() {
        return Err(ApiError::Conflict("session is read-only".into()));
    }
    let target = fb.turn.unwrap_or_else(|| slot.snapshot().turn);
    let guard = Arc::clone(&slot.command).lock_owned().await;

    let job = Arc::clone(&slot);
    let applied = tokio::task::spawn_blocking(move || {
        let session = job.session.as_ref().expect("checked above");
        let mut s = session.lock().unwrap();
        let turn = s.history().iter().filter(|e| e.event == "feedback").count() as u64;
        if s.phase() != Phase::AwaitFeedback {
            return Err(ApiError::Conflict(format!("session is in {}, not awaiting feedback", s.phase())));
        }
        if turn != target {
            return Err(ApiError::Conflict(format!("turn {target} was already answered; current turn is {turn}")));
        }
        s.submit_feedback(fb.decision).map_err(|e| match e {
            PipelineError::EmptyFeedback => ApiError::BadRequest(e.to_string()),
            e => ApiError::Conflict(e.to_string()),
        })?;
        job.publish(&s);
        Ok(turn)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;

    let job = Arc::clone(&slot);
    tokio::task::spawn_blocking(move || {
        job.drive();
        drop(guard);
    });
    Ok((StatusCode::ACCEPTED, Json(json!({ "accepted": true, "turn": applied }))).into_response())
}

#[derive(Debug, Deserialize)]
pub struct StreamQuery {
    pub from: Option<usize>,
}

#[derive(Serialize)]
struct Frame<'a> {
    seq: u64,
    phase: Phase,
    event: &'a str,
    payload: &'a serde_json::Value,
}

fn frame(e: &Event) -> SseEvent {
    let data = serde_json::to_string(&Frame {
        seq: e.seq,
        phase: e.phase,
        event: &e.event,
        payload: &e.payload,
    })
    .expect("frame serializes");
    SseEvent::default().id(e.seq.to_string()).data(data)
}

/// History from `from` (or just past `Last-Event-ID`), then live events.
/// The stream ends after the terminal event.
pub async fn stream_events(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<StreamQuery>,
    headers: HeaderMap,
) -> Result<Sse<impl Stream<Item = Result<SseEvent, Infallible>>>, ApiError> {
    let slot = app.slot(&id)?;
    let resume = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse::<usize>().ok())
        .map(|n| n + 1);
    let start = q.from.or(resume).unwrap_or(0);
    let rx = slot.log.subscribe();
    let events = stream::unfold((slot, start, rx, false), |(slot, next, mut rx, done)| async move {
        if done {
            return None;
        }
        loop {
            rx.borrow_and_update();
            if let Some(e) = slot.log.get(next) {
                let terminal = e.is_terminal();
                return Some((Ok(frame(&e)), (slot, next + 1, rx, terminal)));
            }
            if rx.changed().await.is_err() {
                // Closed: drain whatever arrived before closing, then stop.
                return slot
                    .log
                    .get(next)
                    .map(|e| (Ok(frame(&e)), (slot.clone(), next + 1, rx, e.is_terminal())));
            }
        }
    });
    Ok(Sse::new(events).keep_alive(KeepAlive::default()))
}
