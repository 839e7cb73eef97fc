//! Evaluation runner: task suites, budget sweeps and the OCR/SER/CASR/OER
//! metrics computed from their raw results.

mod metrics;
mod report;

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::{allocate_rule_based, assignment_cost, skill_affordances_with, AllocMode, Profiles};
use crate::fixtures;
use crate::llm::{
    ChatBackend, LiveBackend, LiveConfig, LlmError, MockBackend, MockScript, RecordingBackend, ReplayBackend,
    Transcript, TranscriptWriter,
};
use crate::par::{self, Parallelism};
use crate::pipeline::{Budgets, Clock, FeedbackSource, FixedClock, Oracle, Phase, Preference, Session, SessionConfig};
use crate::prompts::Templates;
use crate::skills::{goal_satisfied, Goal, SkillTable};
use crate::world::{AgentId, FloorplanType, Scene};

pub use metrics::{
    compute_casr, compute_ocr, compute_ser, compute_oer, mean_std, rate, stochastic_stats, truncate2, fmt2,
    GroupRates, MeanStd, RateTable, StdKind,
};
pub use report::{MetricsReport, Stats};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read suite {path}: {message}")]
    Suite { path: String, message: String },
    #[error("at least two groups are needed, got {0}")]
    TooFewGroups(usize),
    #[error(transparent)]
    Backend(#[from] LlmError),
    #[error("bad raw results line {line}: {message}")]
    Raw { line: usize, message: String },
}

/// Floorplan groups, in report column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    K,
    L,
    Bd,
    Bt,
}

impl Group {
    pub const ALL: [Group; 4] = [Group::K, Group::L, Group::Bd, Group::Bt];

    pub fn of(floorplan: FloorplanType) -> Group {
        match floorplan {
            FloorplanType::Kitchen => Group::K,
            FloorplanType::LivingRoom => Group::L,
            FloorplanType::Bedroom => Group::Bd,
            FloorplanType::Bathroom => Group::Bt,
        }
    }

    pub fn prefix(self) -> &'static str {
        match self {
            Group::K => "K",
            Group::L => "L",
            Group::Bd => "Bd",
            Group::Bt => "Bt",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SuiteEntry {
    pub floorplan_type: FloorplanType,
    pub scene_id: String,
    pub instruction: String,
    pub goal: Goal,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub preferences: Vec<Preference>,
    /// Scripted replies for the mock backend.
    #[serde(default)]
    pub mock: MockScript,
}

impl SuiteEntry {
    pub fn group(&self) -> Group {
        Group::of(self.floorplan_type)
    }

    pub fn oracle(&self) -> Oracle {
        Oracle {
            goal: self.goal.clone(),
            preferences: self.preferences.clone(),
            default_agent: AgentId::Robot,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskSuite {
    #[serde(default = "one")]
    pub version: u32,
    #[serde(default)]
    pub name: String,
    pub entries: Vec<SuiteEntry>,
}

fn one() -> u32 {
    1
}

impl TaskSuite {
    pub fn from_json(text: &str) -> Result<TaskSuite, HarnessError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| HarnessError::Suite {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TaskSuite, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Suite {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        TaskSuite::from_json(&text).map_err(|e| match e {
            HarnessError::Suite { path: p, message } => HarnessError::Suite {
                path: path.display().to_string(),
                message: format!("{p}: {message}"),
            },
            other => other,
        })
    }

    /// The 40-entry household suite.
    pub fn bundled() -> TaskSuite {
        TaskSuite::from_json(fixtures::SUITE_JSON).expect("bundled suite parses")
    }
}

/// Where replies come from during a sweep.
#[derive(Clone)]
pub enum BackendSpec {
    /// Each entry's own mock script.
    Mock,
    Replay(Arc<Transcript>),
    Live(LiveConfig),
}

impl BackendSpec {
    pub fn name(&self) -> &'static str {
        match self {
            BackendSpec::Mock => "mock",
            BackendSpec::Replay(_) => "replay",
            BackendSpec::Live(_) => "live",
        }
    }
}

#[derive(Clone)]
pub struct RunConfig {
    pub backend: BackendSpec,
    pub budgets: Vec<u32>,
    pub alloc: AllocMode,
    pub parallelism: Parallelism,
    pub profiles: Arc<Profiles>,
    pub templates: Arc<Templates>,
    /// Every exchange is appended here when set.
    pub record: Option<Arc<TranscriptWriter>>,
    pub clock: Arc<dyn Clock>,
}

impl RunConfig {
    pub fn new(backend: BackendSpec, budgets: Vec<u32>, alloc: AllocMode) -> RunConfig {
        RunConfig {
            backend,
            budgets,
            alloc,
            parallelism: Parallelism::default(),
            profiles: Arc::new(Profiles::bundled()),
            templates: Arc::new(Templates::bundled()),
            record: None,
            clock: Arc::new(FixedClock::default()),
        }
    }

    pub fn with_parallelism(mut self, parallelism: Parallelism) -> Self {
        self.parallelism = parallelism;
        self
    }

    pub fn with_record(mut self, writer: Arc<TranscriptWriter>) -> Self {
        self.record = Some(writer);
        self
    }
}

/// Outcome of one (entry, budget) session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RawResult {
    pub entry: usize,
    pub group: Group,
    pub scene_id: String,
    pub budget: u32,
    pub phase: Phase,
    /// The reviewer approved within the feedback budget.
    pub approved: bool,
    pub feedback_rounds: u32,
    /// The plan ran to the end within the refinement budget.
    pub executed: bool,
    pub refine_rounds: u32,
    pub goal_satisfied: bool,
    pub alloc: AllocMode,
    pub agents: Option<Vec<AgentId>>,
    /// Rule-based assignment of the same plan.
    pub reference: Option<Vec<AgentId>>,
    pub cost: Option<f64>,
    pub reference_cost: Option<f64>,
    pub allocation_success: bool,
    /// Allocated plan ran to the end at the reference cost.
    pub optimal: bool,
    pub requests: usize,
    pub failure: Option<String>,
}

impl RawResult {
    fn failed(entry: usize, e: &SuiteEntry, budget: u32, alloc: AllocMode, failure: String) -> RawResult {
        RawResult {
            entry,
            group: e.group(),
            scene_id: e.scene_id.clone(),
            budget,
            phase: Phase::Failed,
            approved: false,
            feedback_rounds: 0,
            executed: false,
            refine_rounds: 0,
            goal_satisfied: false,
            alloc,
            agents: None,
            reference: None,
            cost: None,
            reference_cost: None,
            allocation_success: false,
            optimal: false,
            requests: 0,
            failure: Some(failure),
        }
    }

    pub fn correct_skills(&self) -> usize {
        match (&self.agents, &self.reference) {
            (Some(a), Some(r)) => a.iter().zip(r).filter(|(x, y)| x == y).count(),
            _ => 0,
        }
    }

    pub fn total_skills(&self) -> usize {
        match (&self.agents, &self.reference) {
            (Some(_), Some(r)) => r.len(),
            _ => 0,
        }
    }
}

pub fn write_jsonl(raw: &[RawResult]) -> String {
    raw.iter()
        .map(|r| serde_json::to_string(r).expect("raw result serializes") + "\n")
        .collect()
}

pub fn read_jsonl(text: &str) -> Result<Vec<RawResult>, HarnessError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| HarnessError::Raw {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Transcript key of one sweep session.
pub fn session_key(entry: usize, budget: u32) -> String {
    format!("{entry}/{budget}")
}

fn backend_for(
    config: &RunConfig,
    live: &Option<LiveBackend>,
    entry: &SuiteEntry,
    key: String,
) -> Arc<dyn ChatBackend> {
    let inner: Arc<dyn ChatBackend> = match &config.backend {
        BackendSpec::Mock => Arc::new(MockBackend::new(entry.mock.clone())),
        BackendSpec::Replay(t) => Arc::new(ReplayBackend::new(Arc::clone(t)).with_session(key.clone())),
        BackendSpec::Live(_) => Arc::new(live.clone().expect("live backend configured")),
    };
    match &config.record {
        Some(w) => Arc::new(RecordingBackend::new(inner, Arc::clone(w)).with_session(key)),
        None => inner,
    }
}

/// Seeds differ per entry so a fixed run seed still draws independent plans.
fn alloc_for(mode: AllocMode, entry: usize) -> AllocMode {
    match mode {
        AllocMode::Random { seed } => AllocMode::Random {
            seed: seed.wrapping_add(entry as u64),
        },
        m => m,
    }
}

/// Runs one fresh session per entry and budget, with oracle review.
pub fn run_entry(config: &RunConfig, live: &Option<LiveBackend>, index: usize, entry: &SuiteEntry, budget: u32) -> RawResult {
    let alloc = alloc_for(config.alloc, index);
    let scene: Scene = match fixtures::scene(&entry.scene_id) {
        Some(Ok(s)) => s,
        Some(Err(e)) => return RawResult::failed(index, entry, budget, alloc, e.to_string()),
        None => {
            return RawResult::failed(index, entry, budget, alloc, format!("unknown scene {}", entry.scene_id))
        }
    };
    let session_config = SessionConfig {
        budgets: Budgets::uniform(budget),
        alloc,
        profiles: Arc::clone(&config.profiles),
        templates: Arc::clone(&config.templates),
        clock: Arc::clone(&config.clock),
        ..SessionConfig::default()
    };
    let backend = backend_for(config, live, entry, session_key(index, budget));
    let mut session = match Session::new(&entry.instruction, scene, backend, session_config) {
        Ok(s) => s,
        Err(e) => return RawResult::failed(index, entry, budget, alloc, e.to_string()),
    };
    let mut source = FeedbackSource::Oracle(entry.oracle());
    session.run(&mut source);

    let st = session.state();
    let mut r = RawResult::failed(index, entry, budget, alloc, String::new());
    r.phase = st.phase;
    r.failure = st.failure.clone();
    r.approved = st.approved == Some(true);
    r.feedback_rounds = st.feedback_rounds;
    r.executed = st.executed;
    r.refine_rounds = st.refine_rounds;
    r.requests = st.history.iter().filter(|e| e.event == "prompt").count();
    if let (true, Some(trace)) = (st.executed, &st.trace) {
        r.goal_satisfied = goal_satisfied(&trace.final_scene, &entry.goal);
    }
    if let (true, Some(plan)) = (st.executed, &st.plan) {
        let untagged = plan.untagged();
        let affs = skill_affordances_with(SkillTable::bundled(), &untagged, &config.profiles);
        if let Ok(reference) = allocate_rule_based(&untagged, &affs) {
            r.reference_cost = assignment_cost(&affs, &reference);
            r.reference = Some(reference.agents);
        }
        if let Some(rec) = &st.allocation {
            r.allocation_success = rec.success;
            r.cost = rec.cost;
            r.agents = rec.assignment.as_ref().map(|a| a.agents.clone());
        }
        r.optimal = r.allocation_success
            && matches!((r.cost, r.reference_cost), (Some(c), Some(rc)) if (c - rc).abs() < 1e-9);
    }
    r
}

/// Every entry at every budget. Results are ordered by entry, then budget.
pub fn run_suite(suite: &TaskSuite, config: &RunConfig) -> Result<Vec<RawResult>, HarnessError> {
    let live = match &config.backend {
        BackendSpec::Live(c) => Some(LiveBackend::from_env(c.clone())?),
        _ => None,
    };
    let nb = config.budgets.len();
    let results = par::map_range(config.parallelism, suite.entries.len() * nb, |i| {
        let (e, b) = (i / nb, config.budgets[i % nb]);
        run_entry(config, &live, e, &suite.entries[e], b)
    });
    Ok(results)
}
