use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::Serialize;
use serde_json::Value;
use taskweave_core::allocation::{AllocMode, Profiles};
use taskweave_core::harness::TaskSuite;
use taskweave_core::llm::{LiveConfig, Transcript};
use taskweave_core::pipeline::{Budgets, Clock, Event, EventSink, Phase, Session, SystemClock};
use taskweave_core::prompts::Templates;
use taskweave_core::world::{AgentId, Scene};
use taskweave_core::fixtures;
use tokio::sync::watch;

/// Everything a server needs to create sessions.
#[derive(Clone)]
pub struct ServiceConfig {
    /// Sessions not yet finished, above which creation is refused.
    pub max_sessions: usize,
    /// Event logs are appended to `<dir>/<id>.jsonl` when set, and read
    /// back as read-only sessions at startup.
    pub persist_dir: Option<PathBuf>,
    pub scenes: Arc<BTreeMap<String, Scene>>,
    /// Mock scripts are looked up here by scene and task.
    pub suite: Arc<TaskSuite>,
    pub transcript: Option<Arc<Transcript>>,
    pub live: Option<LiveConfig>,
    pub templates: Arc<Templates>,
    pub profiles: Arc<Profiles>,
    pub clock: Arc<dyn Clock>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        let scenes = fixtures::scene_ids()
            .filter_map(|id| fixtures::scene(id)?.ok().map(|s| (id.to_string(), s)))
            .collect();
        ServiceConfig {
            max_sessions: 64,
            persist_dir: None,
            scenes: Arc::new(scenes),
            suite: Arc::new(TaskSuite::bundled()),
            transcript: None,
            live: None,
            templates: Arc::new(Templates::bundled()),
            profiles: Arc::new(Profiles::bundled()),
            clock: Arc::new(SystemClock),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AllocationView {
    pub mode: AllocMode,
    pub agents: Option<Vec<AgentId>>,
    pub cost: Option<f64>,
    pub success: bool,
    pub error: Option<String>,
}

/// What `GET /sessions/{id}` returns. Refreshed only between pipeline steps.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Snapshot {
    pub id: String,
    pub created_at: String,
    pub scene_id: String,
    pub instruction: String,
    pub phase: Phase,
    pub task_description: String,
    pub subtasks: Vec<String>,
    pub plan_text: Option<String>,
    pub feedback_rounds: u32,
    pub refine_rounds: u32,
    pub budgets: Budgets,
    pub approved: Option<bool>,
    pub executed: bool,
    pub last_error: Option<String>,
    pub failure: Option<String>,
    pub allocation: Option<AllocationView>,
    /// Reviews given so far; the number to send with the next feedback.
    pub turn: u64,
    pub events: usize,
    pub read_only: bool,
    /// The scene after execution if the plan ran, the initial scene otherwise.
    pub scene: Option<Scene>,
}

fn reviews(events: &[Event]) -> u64 {
    events.iter().filter(|e| e.event == "feedback").count() as u64
}

impl Snapshot {
    pub(crate) fn of_session(id: &str, created_at: &str, session: &Session) -> Snapshot {
        let st = session.state();
        let scene = match &st.trace {
            Some(t) if st.executed => t.final_scene.clone(),
            _ => session.scene().clone(),
        };
        Snapshot {
            id: id.to_string(),
            created_at: created_at.to_string(),
            scene_id: st.scene_id.clone(),
            instruction: st.instruction.clone(),
            phase: st.phase,
            task_description: st.task_description.clone(),
            subtasks: st.subtasks.clone(),
            plan_text: st.plan_text(),
            feedback_rounds: st.feedback_rounds,
            refine_rounds: st.refine_rounds,
            budgets: st.budgets,
            approved: st.approved,
            executed: st.executed,
            last_error: st.last_error.clone(),
            failure: st.failure.clone(),
            allocation: st.allocation.as_ref().map(|a| AllocationView {
                mode: a.mode,
                agents: a.assignment.as_ref().map(|x| x.agents.clone()),
                cost: a.cost,
                success: a.success,
                error: a.error.clone(),
            }),
            turn: reviews(session.history()),
            events: session.history().len(),
            read_only: false,
            scene: Some(scene),
        }
    }

    /// Best reconstruction from a persisted log.
    pub(crate) fn of_log(id: &str, events: &[Event], scenes: &BTreeMap<String, Scene>) -> Snapshot {
        let find = |name: &str| events.iter().rev().find(|e| e.event == name).map(|e| &e.payload);
        let text = |v: Option<&Value>, key: &str| v.and_then(|p| p[key].as_str()).map(String::from);
        let started = find("started");
        let done = find("done");
        let decomposition = find("decomposition");
        let scene_id = text(started, "sceneId").unwrap_or_default();
        Snapshot {
            id: id.to_string(),
            created_at: events.first().map(|e| e.timestamp.clone()).unwrap_or_default(),
            instruction: text(started, "instruction").unwrap_or_default(),
            phase: events.last().map(|e| e.phase).unwrap_or(Phase::Failed),
            task_description: text(decomposition, "taskDescription").unwrap_or_default(),
            subtasks: decomposition
                .and_then(|d| serde_json::from_value(d["subtasks"].clone()).ok())
                .unwrap_or_default(),
            plan_text: text(done, "planText").or_else(|| text(find("plan"), "text")),
            feedback_rounds: events
                .iter()
                .filter(|e| e.event == "feedback" && e.payload["decision"] == "revise" && e.payload["budgetExhausted"] != true)
                .count() as u32,
            refine_rounds: events
                .iter()
                .filter(|e| e.event == "phase" && e.payload["phase"] == "Refine")
                .count() as u32,
            budgets: started
                .and_then(|s| serde_json::from_value(s["budgets"].clone()).ok())
                .unwrap_or_default(),
            approved: done.and_then(|d| d["approved"].as_bool()),
            executed: done.and_then(|d| d["executed"].as_bool()).unwrap_or(false),
            last_error: find("execution").and_then(|e| e["error"]["message"].as_str()).map(String::from),
            failure: text(find("failed"), "reason"),
            allocation: None,
            turn: reviews(events),
            events: events.len(),
            read_only: true,
            scene: scenes.get(&scene_id).cloned(),
            scene_id,
        }
    }
}

/// Append-only event log shared by the session's sink and its readers.
pub(crate) struct Log {
    events: Mutex<Vec<Event>>,
    /// Length after each append. `None` once no more events can arrive.
    len: Mutex<Option<watch::Sender<usize>>>,
    rx: watch::Receiver<usize>,
    file: Option<Mutex<File>>,
}

impl Log {
    fn new(events: Vec<Event>, file: Option<File>, live: bool) -> Arc<Log> {
        let (tx, rx) = watch::channel(events.len());
        Arc::new(Log {
            events: Mutex::new(events),
            len: Mutex::new(live.then_some(tx)),
            rx,
            file: file.map(Mutex::new),
        })
    }

    pub(crate) fn push(&self, e: &Event) {
        if let Some(f) = &self.file {
            let mut line = serde_json::to_string(e).expect("event serializes");
            line.push('\n');
            if let Err(err) = f.lock().unwrap().write_all(line.as_bytes()) {
                tracing::warn!(error = %err, "cannot persist event");
            }
        }
        let mut events = self.events.lock().unwrap();
        events.push(e.clone());
        if let Some(tx) = self.len.lock().unwrap().as_ref() {
            tx.send_replace(events.len());
        }
    }

    pub(crate) fn get(&self, index: usize) -> Option<Event> {
        self.events.lock().unwrap().get(index).cloned()
    }

    pub(crate) fn subscribe(&self) -> watch::Receiver<usize> {
        self.rx.clone()
    }

    /// Wakes readers for good once the session has ended.
    pub(crate) fn close(&self) {
        self.len.lock().unwrap().take();
    }
}

/// One session as the server holds it.
pub(crate) struct Slot {
    pub(crate) id: String,
    pub(crate) created_at: String,
    pub(crate) log: Arc<Log>,
    pub(crate) snapshot: RwLock<Arc<Snapshot>>,
    /// `None` for sessions recovered from disk.
    pub(crate) session: Option<Mutex<Session>>,
    /// Held by whoever is advancing the session.
    pub(crate) command: Arc<tokio::sync::Mutex<()>>,
}

impl Slot {
    pub(crate) fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().unwrap().clone()
    }

    pub(crate) fn publish(&self, session: &Session) {
        let snap = Snapshot::of_session(&self.id, &self.created_at, session);
        *self.snapshot.write().unwrap() = Arc::new(snap);
    }

    /// Steps until the session pauses, refreshing the snapshot after each step.
    pub(crate) fn drive(&self) {
        let Some(session) = &self.session else { return };
        let mut s = session.lock().unwrap();
        loop {
            self.publish(&s);
            let p = s.phase();
            if p == Phase::AwaitFeedback || p.is_terminal() {
                break;
            }
            s.step();
        }
        if s.phase().is_terminal() {
            self.log.close();
        }
    }
}

pub(crate) fn log_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.jsonl"))
}

/// A fresh log, and the sink that feeds it.
pub(crate) fn new_log(persist: Option<&Path>, id: &str) -> std::io::Result<(Arc<Log>, EventSink)> {
    let file = match persist {
        Some(dir) => Some(OpenOptions::new().create(true).append(true).open(log_path(dir, id))?),
        None => None,
    };
    let log = Log::new(Vec::new(), file, true);
    let sink_log = Arc::clone(&log);
    Ok((log, Arc::new(move |e: &Event| sink_log.push(e))))
}

/// Every `<id>.jsonl` in `dir` as a read-only slot. Unreadable lines end a log early.
pub(crate) fn recover(dir: &Path, scenes: &BTreeMap<String, Scene>) -> std::io::Result<Vec<Slot>> {
    fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("jsonl") {
            continue;
        }
        let Some(id) = path.file_stem().and_then(|s| s.to_str()).map(String::from) else {
            continue;
        };
        let mut events = Vec::new();
        for line in BufReader::new(File::open(&path)?).lines() {
            match serde_json::from_str::<Event>(&line?) {
                Ok(e) => events.push(e),
                Err(err) => {
                    tracing::warn!(file = %path.display(), error = %err, "truncated event log");
                    break;
                }
            }
        }
        let snap = Snapshot::of_log(&id, &events, scenes);
        out.push(Slot {
            created_at: snap.created_at.clone(),
            snapshot: RwLock::new(Arc::new(snap)),
            log: Log::new(events, None, false),
            session: None,
            command: Arc::new(tokio::sync::Mutex::new(())),
            id,
        });
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}
