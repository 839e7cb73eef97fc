use std::collections::BTreeSet;
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};

use super::decompose::{extract_kinds, parse_decomposition, Decomposition};
use super::events::{Clock, Event, EventSink, SystemClock};
use super::feedback::{FeedbackContext, FeedbackDecision, FeedbackSource};
use super::render::{render_entities, render_kind_summary};
use super::{Budgets, Phase, PipelineError, DECOMPOSE_REASKS, REPAIR_BUDGET};
use crate::allocation::{
    allocate_llm_with, allocate_random, allocate_rule_based, assignment_cost, rewrite_plan, skill_affordances_with, AllocError,
    AllocMode, Assignment, Profiles,
};
use crate::llm::{ChatBackend, ChatRequest, LlmError, Stage, DEFAULT_MODEL};
use crate::planscript::{extract_fenced, parse, serialize, validate_with, PlanScript};
use crate::prompts::Templates;
use crate::skills::{execute_plan_with, ExecutionTrace, SkillTable};
use crate::world::{relevant_entities, AgentId, Scene};

#[derive(Clone)]
pub struct SessionConfig {
    pub budgets: Budgets,
    /// Agent for untagged steps before allocation.
    pub default_agent: AgentId,
    pub alloc: AllocMode,
    pub profiles: Arc<Profiles>,
    pub templates: Arc<Templates>,
    pub clock: Arc<dyn Clock>,
    pub model: String,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            budgets: Budgets::default(),
            default_agent: AgentId::Robot,
            alloc: AllocMode::RuleBased,
            profiles: Arc::new(Profiles::bundled()),
            templates: Arc::new(Templates::bundled()),
            clock: Arc::new(SystemClock),
            model: DEFAULT_MODEL.into(),
        }
    }
}

impl SessionConfig {
    pub fn with_budgets(mut self, budgets: Budgets) -> Self {
        self.budgets = budgets;
        self
    }

    pub fn with_alloc(mut self, alloc: AllocMode) -> Self {
        self.alloc = alloc;
        self
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_templates(mut self, templates: Arc<Templates>) -> Self {
        self.templates = templates;
        self
    }
}

/// Result of the allocation phase.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AllocationRecord {
    pub mode: AllocMode,
    pub assignment: Option<Assignment>,
    /// Total cost under the assignment, absent when an agent lacks a skill.
    pub cost: Option<f64>,
    /// Whether the agent-tagged plan ran to the end under the profiles.
    pub success: bool,
    pub error: Option<String>,
    pub trace: Option<ExecutionTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionState {
    pub phase: Phase,
    pub instruction: String,
    pub scene_id: String,
    pub task_description: String,
    pub subtasks: Vec<String>,
    /// Scene kinds named by the decomposition. Drives which objects prompts show.
    pub kinds: Vec<String>,
    pub plan: Option<PlanScript>,
    pub feedback_rounds: u32,
    pub refine_rounds: u32,
    pub budgets: Budgets,
    /// `Some(true)` once a reviewer approves, `Some(false)` if the feedback budget ran out first.
    pub approved: Option<bool>,
    /// The unallocated plan ran to the end.
    pub executed: bool,
    pub pending_feedback: Option<String>,
    /// Message of the most recent execution error.
    pub last_error: Option<String>,
    pub failure: Option<String>,
    pub trace: Option<ExecutionTrace>,
    pub allocation: Option<AllocationRecord>,
    pub history: Vec<Event>,
}

impl SessionState {
    pub fn plan_text(&self) -> Option<String> {
        self.plan.as_ref().map(serialize)
    }
}

/// One planning session over one scene.
///
/// Each call to [`Session::step`] performs one phase. The session pauses in
/// `AwaitFeedback` until [`Session::submit_feedback`] is called.
pub struct Session {
    config: SessionConfig,
    scene: Scene,
    backend: Arc<dyn ChatBackend>,
    state: SessionState,
    sink: Option<EventSink>,
}

const FORMAT_NOTE: &str = "\nYour last reply could not be read. Follow the reply format exactly.\n";

fn numbered(items: &[String]) -> String {
    items
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}. {s}\n", i + 1))
        .collect()
}

impl Session {
    pub fn new(
        instruction: &str,
        scene: Scene,
        backend: Arc<dyn ChatBackend>,
        config: SessionConfig,
    ) -> Result<Session, PipelineError> {
        Session::with_sink(instruction, scene, backend, config, None)
    }

    /// Like [`Session::new`], calling `sink` with every event including the first.
    pub fn with_sink(
        instruction: &str,
        scene: Scene,
        backend: Arc<dyn ChatBackend>,
        config: SessionConfig,
        sink: Option<EventSink>,
    ) -> Result<Session, PipelineError> {
        let instruction = instruction.trim();
        if instruction.is_empty() {
            return Err(PipelineError::EmptyInstruction);
        }
        let state = SessionState {
            phase: Phase::Decompose1,
            instruction: instruction.to_string(),
            scene_id: scene.id.clone(),
            task_description: String::new(),
            subtasks: Vec::new(),
            kinds: Vec::new(),
            plan: None,
            feedback_rounds: 0,
            refine_rounds: 0,
            budgets: config.budgets,
            approved: None,
            executed: false,
            pending_feedback: None,
            last_error: None,
            failure: None,
            trace: None,
            allocation: None,
            history: Vec::new(),
        };
        let mut s = Session {
            config,
            scene,
            backend,
            state,
            sink,
        };
        s.emit(
            "started",
            json!({
                "instruction": s.state.instruction,
                "sceneId": s.scene.id,
                "budgets": s.state.budgets,
                "alloc": s.config.alloc,
            }),
        );
        Ok(s)
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn phase(&self) -> Phase {
        self.state.phase
    }

    pub fn history(&self) -> &[Event] {
        &self.state.history
    }

    fn emit(&mut self, event: &str, payload: Value) {
        let e = Event {
            seq: self.state.history.len() as u64,
            timestamp: self.config.clock.now(),
            phase: self.state.phase,
            event: event.to_string(),
            payload,
        };
        if let Some(sink) = &self.sink {
            sink(&e);
        }
        self.state.history.push(e);
    }

    fn enter(&mut self, phase: Phase) {
        self.state.phase = phase;
        self.emit("phase", json!({ "phase": phase }));
    }

    fn fail(&mut self, reason: String) {
        self.state.failure = Some(reason.clone());
        self.enter(Phase::Failed);
        self.emit("failed", json!({ "reason": reason }));
    }

    fn finish(&mut self) {
        self.enter(Phase::Done);
        self.emit(
            "done",
            json!({
                "approved": self.state.approved,
                "executed": self.state.executed,
                "planText": self.state.plan_text(),
                "allocationSuccess": self.state.allocation.as_ref().map(|a| a.success),
            }),
        );
    }

    fn ask_request(&mut self, mut req: ChatRequest) -> Result<String, LlmError> {
        req.model = self.config.model.clone();
        let stage = req.stage;
        self.emit(
            "prompt",
            json!({ "stage": stage, "hash": req.hash(), "user": req.user_text() }),
        );
        let result = self.backend.complete(&req);
        match &result {
            Ok(reply) => self.emit("reply", json!({ "stage": stage, "reply": reply })),
            Err(e) => self.emit("llmError", json!({ "stage": stage, "error": e.to_string() })),
        }
        result
    }

    fn ask(&mut self, stage: Stage, user: String) -> Result<String, LlmError> {
        let req = ChatRequest::new(stage, self.config.templates.system.text(), user);
        self.ask_request(req)
    }

    /// Runs the current phase once and returns the phase it led to.
    pub fn step(&mut self) -> Phase {
        match self.state.phase {
            Phase::Decompose1 => self.decompose(Stage::Decompose1),
            Phase::Decompose2 => self.decompose(Stage::Decompose2),
            Phase::Codegen => self.codegen(),
            Phase::Execute => self.execute(),
            Phase::Refine => self.refine(),
            Phase::Allocate => self.allocate(),
            Phase::AwaitFeedback | Phase::Done | Phase::Failed => {}
        }
        self.state.phase
    }

    /// Steps until the session needs feedback or has ended.
    pub fn run_until_pause(&mut self) -> Phase {
        loop {
            let p = self.state.phase;
            if p == Phase::AwaitFeedback || p.is_terminal() {
                return p;
            }
            self.step();
        }
    }

    /// Runs to the end, asking `source` at every review.
    pub fn run(&mut self, source: &mut FeedbackSource) -> Phase {
        loop {
            match self.run_until_pause() {
                Phase::AwaitFeedback => {
                    let ctx = self.feedback_context().expect("plan present while awaiting feedback");
                    let decision = source.decide(&ctx);
                    if let Err(e) = self.submit_feedback(decision) {
                        self.emit("warning", json!({ "message": format!("{e}; approving instead") }));
                        self.submit_feedback(FeedbackDecision::Approve)
                            .expect("approval is always accepted while awaiting feedback");
                    }
                }
                p => return p,
            }
        }
    }

    pub fn feedback_context(&self) -> Option<FeedbackContext> {
        if self.state.phase != Phase::AwaitFeedback {
            return None;
        }
        let plan = self.state.plan.clone()?;
        Some(FeedbackContext {
            plan_text: serialize(&plan),
            plan,
            scene: self.scene.clone(),
            round: self.state.feedback_rounds,
            max_rounds: self.state.budgets.max_feedback,
            task_description: self.state.task_description.clone(),
        })
    }

    /// Applies one review decision. Only valid in `AwaitFeedback`.
    pub fn submit_feedback(&mut self, decision: FeedbackDecision) -> Result<(), PipelineError> {
        if self.state.phase != Phase::AwaitFeedback {
            return Err(PipelineError::WrongPhase {
                expected: Phase::AwaitFeedback,
                actual: self.state.phase,
            });
        }
        match decision {
            FeedbackDecision::Approve => {
                self.emit(
                    "feedback",
                    json!({ "decision": "approve", "round": self.state.feedback_rounds }),
                );
                self.state.approved = Some(true);
                self.enter(Phase::Execute);
            }
            FeedbackDecision::Revise { text } => {
                let text = text.trim().to_string();
                if text.is_empty() {
                    return Err(PipelineError::EmptyFeedback);
                }
                let exhausted = self.state.feedback_rounds >= self.state.budgets.max_feedback;
                self.emit(
                    "feedback",
                    json!({
                        "decision": "revise",
                        "text": text,
                        "round": self.state.feedback_rounds,
                        "budgetExhausted": exhausted,
                    }),
                );
                if exhausted {
                    self.state.approved = Some(false);
                    self.enter(Phase::Execute);
                } else {
                    self.state.feedback_rounds += 1;
                    self.state.pending_feedback = Some(text);
                    self.enter(Phase::Codegen);
                }
            }
        }
        Ok(())
    }

    fn room(&self) -> &'static str {
        self.scene.floorplan_type.room_name()
    }

    fn relevant_text(&self, scene: &Scene, extra: &[String]) -> String {
        let mut kinds: BTreeSet<&str> = self.state.kinds.iter().map(String::as_str).collect();
        kinds.extend(extra.iter().map(String::as_str));
        let kinds: Vec<&str> = kinds.into_iter().collect();
        render_entities(scene, &relevant_entities(scene, &kinds).entities)
    }

    fn decompose(&mut self, stage: Stage) {
        let (environment, draft) = if stage == Stage::Decompose1 {
            (render_kind_summary(&self.scene), String::new())
        } else {
            let rel = relevant_entities(&self.scene, &self.state.kinds);
            for w in rel.warnings.clone() {
                self.emit("warning", json!({ "message": w }));
            }
            (
                format!(
                    "Objects that matter here (id, kind, properties, state, location):\n{}",
                    render_entities(&self.scene, &rel.entities)
                ),
                format!(
                    "A first attempt gave:\nTask Description: {}\nSubtasks:\n{}\nKeep only what these objects allow, and be specific.\n",
                    self.state.task_description,
                    numbered(&self.state.subtasks)
                ),
            )
        };
        let prompt = match self.config.templates.decompose.render(&[
            ("room", self.room()),
            ("instruction", &self.state.instruction),
            ("environment", &environment),
            ("draft", &draft),
        ]) {
            Ok(p) => p,
            Err(e) => return self.fail(e.to_string()),
        };

        let mut parsed: Option<Decomposition> = None;
        for attempt in 0..=DECOMPOSE_REASKS {
            let user = if attempt == 0 {
                prompt.clone()
            } else {
                format!("{prompt}{FORMAT_NOTE}")
            };
            match self.ask(stage, user) {
                Ok(reply) => {
                    parsed = parse_decomposition(&reply);
                    if parsed.is_some() {
                        break;
                    }
                    self.emit(
                        "warning",
                        json!({ "message": format!("{stage} reply has no task description and subtask list") }),
                    );
                }
                Err(e) => return self.fail(format!("{stage}: {e}")),
            }
        }
        let Some(d) = parsed else {
            return self.fail(format!(
                "{stage}: reply could not be read after {DECOMPOSE_REASKS} re-asks"
            ));
        };

        let matches = extract_kinds(&d.subtasks, &self.scene);
        for s in &matches.unmatched {
            self.emit("unmatchedSubtask", json!({ "subtask": s }));
        }
        let mut kinds: BTreeSet<String> = matches.kinds.into_iter().collect();
        if stage == Stage::Decompose2 {
            kinds.extend(self.state.kinds.drain(..));
        }
        self.state.kinds = kinds.into_iter().collect();
        self.state.task_description = d.task_description;
        self.state.subtasks = d.subtasks;
        self.emit(
            "decomposition",
            json!({
                "stage": stage,
                "taskDescription": self.state.task_description,
                "subtasks": self.state.subtasks,
                "kinds": self.state.kinds,
            }),
        );
        self.enter(if stage == Stage::Decompose1 {
            Phase::Decompose2
        } else {
            Phase::Codegen
        });
    }

    /// Asks for a plan and repairs it until it parses and validates.
    fn obtain_plan(&mut self, stage: Stage, user: String, entities: &str) -> Result<PlanScript, String> {
        let table = SkillTable::bundled();
        let skills = table.render();
        let mut reply = self.ask(stage, user).map_err(|e| format!("{stage}: {e}"))?;
        let mut repairs = 0;
        loop {
            let (body, fenced) = extract_fenced(&reply);
            let body = body.to_string();
            if !fenced {
                self.emit(
                    "warning",
                    json!({ "message": "reply has no code fence; reading it whole" }),
                );
            }
            let issues = match parse(&body) {
                Err(e) => format!("syntax error: {e}\n"),
                Ok(mut plan) => {
                    let report = validate_with(table, &plan, &self.scene);
                    if report.is_clean() {
                        if plan.task_description.is_empty() {
                            plan.task_description = self.state.task_description.clone();
                        }
                        self.emit("validation", json!({ "clean": true, "repairs": repairs }));
                        return Ok(plan);
                    }
                    report.render()
                }
            };
            self.emit(
                "validation",
                json!({ "clean": false, "issues": issues, "repairs": repairs }),
            );
            if repairs == REPAIR_BUDGET {
                return Err(format!(
                    "no usable script after {REPAIR_BUDGET} repair attempts: {}",
                    issues.trim_end()
                ));
            }
            repairs += 1;
            let user = self
                .config
                .templates
                .repair
                .render(&[
                    ("previous", &body),
                    ("issues", &issues),
                    ("skills", &skills),
                    ("entities", entities),
                ])
                .map_err(|e| e.to_string())?;
            reply = self.ask(Stage::Repair, user).map_err(|e| format!("{}: {e}", Stage::Repair))?;
        }
    }

    fn store_plan(&mut self, stage: Stage, plan: PlanScript) {
        let text = serialize(&plan);
        self.state.plan = Some(plan);
        self.emit("plan", json!({ "stage": stage, "text": text }));
    }

    fn codegen(&mut self) {
        let skills = SkillTable::bundled().render();
        let entities = self.relevant_text(&self.scene, &[]);
        let (stage, rendered) = match self.state.pending_feedback.take() {
            None => (
                Stage::Codegen,
                self.config.templates.codegen.render(&[
                    ("task", &self.state.task_description),
                    ("subtasks", &numbered(&self.state.subtasks)),
                    ("skills", &skills),
                    ("entities", &entities),
                ]),
            ),
            Some(feedback) => {
                let previous = self.state.plan.as_ref().map(serialize).unwrap_or_default();
                (
                    Stage::Revise,
                    self.config.templates.revise.render(&[
                        ("round", &self.state.feedback_rounds.to_string()),
                        ("task", &self.state.task_description),
                        ("plan", &previous),
                        ("feedback", &feedback),
                        ("skills", &skills),
                        ("entities", &entities),
                    ]),
                )
            }
        };
        let user = match rendered {
            Ok(u) => u,
            Err(e) => return self.fail(e.to_string()),
        };
        match self.obtain_plan(stage, user, &entities) {
            Ok(plan) => {
                self.store_plan(stage, plan);
                self.enter(Phase::AwaitFeedback);
            }
            Err(e) => self.fail(e),
        }
    }

    fn execute(&mut self) {
        let Some(plan) = self.state.plan.clone() else {
            return self.fail("no plan to execute".into());
        };
        let trace = execute_plan_with(
            SkillTable::bundled(),
            &self.scene,
            &plan.invocations,
            self.config.default_agent,
            None,
        );
        let error = trace.error().cloned();
        self.emit(
            "execution",
            json!({
                "success": error.is_none(),
                "steps": trace.steps.len(),
                "refineRound": self.state.refine_rounds,
                "error": error,
            }),
        );
        self.state.trace = Some(trace);
        match error {
            None => {
                self.state.executed = true;
                self.enter(Phase::Allocate);
            }
            Some(e) => {
                self.state.last_error = Some(e.message.clone());
                if self.state.refine_rounds < self.state.budgets.max_refine {
                    self.enter(Phase::Refine);
                } else {
                    self.fail(format!(
                        "execution failed after {} refinements: {}",
                        self.state.refine_rounds, e.message
                    ));
                }
            }
        }
    }

    fn refine(&mut self) {
        let (Some(plan), Some(trace)) = (self.state.plan.clone(), self.state.trace.clone()) else {
            return self.fail("nothing to refine".into());
        };
        let Some(error) = trace.error().cloned() else {
            return self.fail("nothing to refine".into());
        };
        self.state.refine_rounds += 1;
        let failed_scene = &trace.final_scene;
        let extra: Vec<String> = error
            .objects
            .iter()
            .filter_map(|id| failed_scene.object(id).map(|o| o.kind.clone()))
            .collect();
        let entities = self.relevant_text(failed_scene, &extra);
        let skills = SkillTable::bundled().render();
        let user = match self.config.templates.refine.render(&[
            ("round", &self.state.refine_rounds.to_string()),
            ("task", &self.state.task_description),
            ("plan", &serialize(&plan)),
            ("error", &error.message),
            ("entities", &entities),
            ("skills", &skills),
        ]) {
            Ok(u) => u,
            Err(e) => return self.fail(e.to_string()),
        };
        match self.obtain_plan(Stage::Refine, user, &entities) {
            Ok(plan) => {
                self.store_plan(Stage::Refine, plan);
                self.enter(Phase::Execute);
            }
            Err(e) => self.fail(e),
        }
    }

    fn allocate(&mut self) {
        let Some(plan) = self.state.plan.as_ref().map(PlanScript::untagged) else {
            return self.fail("no plan to allocate".into());
        };
        let table = SkillTable::bundled();
        let profiles = Arc::clone(&self.config.profiles);
        let templates = Arc::clone(&self.config.templates);
        let affordances = skill_affordances_with(table, &plan, &profiles);
        let mode = self.config.alloc;
        let chosen = match mode {
            AllocMode::RuleBased => allocate_rule_based(&plan, &affordances),
            AllocMode::Random { seed } => Ok(allocate_random(&plan, seed)),
            AllocMode::LlmBased => {
                allocate_llm_with(&plan, &profiles, table, &templates, &mut |req| self.ask_request(req))
            }
        };
        let mut record = AllocationRecord {
            mode,
            assignment: None,
            cost: None,
            success: false,
            error: None,
            trace: None,
        };
        match chosen.and_then(|a| rewrite_plan(&plan, &a).map(|p| (a, p))) {
            Ok((assignment, tagged)) => {
                let trace = execute_plan_with(
                    table,
                    &self.scene,
                    &tagged.invocations,
                    self.config.default_agent,
                    Some(profiles.as_ref()),
                );
                record.cost = assignment_cost(&affordances, &assignment);
                record.success = trace.is_success();
                record.error = trace.error().map(|e| e.message.clone());
                record.assignment = Some(assignment);
                record.trace = Some(trace);
                self.state.plan = Some(tagged);
            }
            Err(AllocError::Backend(e)) => {
                return self.fail(format!("{}: {e}", Stage::Allocate));
            }
            Err(e) => record.error = Some(e.to_string()),
        }
        self.emit(
            "allocation",
            json!({
                "mode": record.mode,
                "agents": record.assignment.as_ref().map(|a| a.steps()),
                "cost": record.cost,
                "success": record.success,
                "error": record.error,
                "planText": self.state.plan_text(),
            }),
        );
        self.state.allocation = Some(record);
        self.finish();
    }
}
