use std::collections::VecDeque;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::planscript::{validate, PlanScript};
use crate::skills::{evaluate_goal, execute_plan, Goal};
use crate::world::{AgentId, Scene};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "lowercase")]
pub enum FeedbackDecision {
    Approve,
    Revise { text: String },
}

impl FeedbackDecision {
    pub fn revise(text: impl Into<String>) -> Self {
        FeedbackDecision::Revise { text: text.into() }
    }
}

/// What a reviewer sees for one round.
#[derive(Debug, Clone)]
pub struct FeedbackContext {
    pub plan: PlanScript,
    pub plan_text: String,
    pub scene: Scene,
    /// Revisions already requested.
    pub round: u32,
    pub max_rounds: u32,
    pub task_description: String,
}

pub trait Prompter {
    fn decide(&mut self, ctx: &FeedbackContext) -> FeedbackDecision;
}

/// Shows the plan and asks `Approve? [y/n]`. End of input approves.
pub struct TerminalPrompter<R, W> {
    input: R,
    output: W,
}

impl<R: BufRead, W: Write> TerminalPrompter<R, W> {
    pub fn new(input: R, output: W) -> Self {
        TerminalPrompter { input, output }
    }

    fn read_line(&mut self) -> Option<String> {
        let mut line = String::new();
        match self.input.read_line(&mut line) {
            Ok(0) | Err(_) => None,
            Ok(_) => Some(line.trim().to_string()),
        }
    }

    fn say(&mut self, text: &str) {
        let _ = self.output.write_all(text.as_bytes());
        let _ = self.output.flush();
    }
}

impl<R: BufRead, W: Write> Prompter for TerminalPrompter<R, W> {
    fn decide(&mut self, ctx: &FeedbackContext) -> FeedbackDecision {
        self.say(&format!(
            "\nTask: {}\nRevisions used: {}/{}\n\n{}\n",
            ctx.task_description, ctx.round, ctx.max_rounds, ctx.plan_text
        ));
        loop {
            self.say("Approve? [y/n] ");
            let Some(answer) = self.read_line() else {
                return FeedbackDecision::Approve;
            };
            match answer.to_ascii_lowercase().as_str() {
                "y" | "yes" => return FeedbackDecision::Approve,
                "n" | "no" => loop {
                    self.say("What should change? ");
                    match self.read_line() {
                        None => return FeedbackDecision::Approve,
                        Some(text) if !text.is_empty() => return FeedbackDecision::Revise { text },
                        Some(_) => {}
                    }
                },
                _ => {}
            }
        }
    }
}

/// Extra conditions a reviewer may hold a plan to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Preference {
    /// Some step uses an object of this kind.
    UsesKind(String),
    /// No step uses an object of this kind.
    AvoidsKind(String),
    /// Holds on the scene after the plan runs.
    Scene(Goal),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleVerdict {
    pub approved: bool,
    pub reasons: Vec<String>,
}

impl OracleVerdict {
    /// The revision request sent back to the planner.
    pub fn feedback_text(&self) -> String {
        self.reasons.join("\n")
    }
}

/// Deterministic reviewer: approves a plan that validates, runs to the end on
/// a copy of the scene, reaches the goal and meets every preference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Oracle {
    pub goal: Goal,
    #[serde(default)]
    pub preferences: Vec<Preference>,
    #[serde(default = "robot")]
    pub default_agent: AgentId,
}

fn robot() -> AgentId {
    AgentId::Robot
}

fn uses_kind(plan: &PlanScript, scene: &Scene, kind: &str) -> bool {
    plan.invocations
        .iter()
        .flat_map(|i| &i.args)
        .any(|id| scene.object(id).is_some_and(|o| o.kind == kind))
}

impl Oracle {
    pub fn new(goal: Goal) -> Oracle {
        Oracle {
            goal,
            preferences: Vec::new(),
            default_agent: AgentId::Robot,
        }
    }

    pub fn verdict(&self, plan: &PlanScript, scene: &Scene) -> OracleVerdict {
        let report = validate(plan, scene);
        if !report.is_clean() {
            let reasons = report.issues.iter().map(|i| format!("line {}: {}", i.line, i.detail)).collect();
            return OracleVerdict {
                approved: false,
                reasons,
            };
        }
        let trace = execute_plan(&scene.clone(), plan, self.default_agent);
        if let Some(e) = trace.error() {
            return OracleVerdict {
                approved: false,
                reasons: vec![format!("The script fails when run: {}", e.message)],
            };
        }
        let mut reasons = Vec::new();
        let eval = evaluate_goal(&trace.final_scene, &self.goal);
        if !eval.satisfied {
            reasons.push("The script runs but does not finish the task.".to_string());
        }
        for p in &self.preferences {
            match p {
                Preference::UsesKind(k) if !uses_kind(plan, scene, k) => reasons.push(format!("Please use the {k}.")),
                Preference::AvoidsKind(k) if uses_kind(plan, scene, k) => {
                    reasons.push(format!("Please do not use the {k}."))
                }
                Preference::Scene(g) if !evaluate_goal(&trace.final_scene, g).satisfied => {
                    reasons.push("The result is not what I asked for.".to_string())
                }
                _ => {}
            }
        }
        OracleVerdict {
            approved: reasons.is_empty(),
            reasons,
        }
    }
}

/// Who answers the review question each round.
pub enum FeedbackSource {
    Interactive(Box<dyn Prompter + Send>),
    /// Consumed in order. Once exhausted, every further round approves.
    Scripted(VecDeque<FeedbackDecision>),
    Oracle(Oracle),
}

impl FeedbackSource {
    pub fn scripted(decisions: impl IntoIterator<Item = FeedbackDecision>) -> Self {
        FeedbackSource::Scripted(decisions.into_iter().collect())
    }

    pub fn decide(&mut self, ctx: &FeedbackContext) -> FeedbackDecision {
        match self {
            FeedbackSource::Interactive(p) => p.decide(ctx),
            FeedbackSource::Scripted(q) => q.pop_front().unwrap_or(FeedbackDecision::Approve),
            FeedbackSource::Oracle(o) => {
                let v = o.verdict(&ctx.plan, &ctx.scene);
                if v.approved {
                    FeedbackDecision::Approve
                } else {
                    FeedbackDecision::Revise {
                        text: v.feedback_text(),
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::planscript::{parse, serialize};
    use crate::skills::FlagTest;
    use crate::world::StateFlag;

    fn ctx(text: &str) -> FeedbackContext {
        let plan = parse(text).unwrap();
        FeedbackContext {
            plan_text: serialize(&plan),
            plan,
            scene: fixtures::scene("mini_fridge").unwrap().unwrap(),
            round: 0,
            max_rounds: 5,
            task_description: "t".into(),
        }
    }

    #[test]
    fn terminal_prompter_reads_revision() {
        let mut out = Vec::new();
        let input = b"maybe\nn\n\nuse tomato\n".as_slice();
        let d = TerminalPrompter::new(input, &mut out).decide(&ctx("OpenObject(Fridge_1)"));
        assert_eq!(d, FeedbackDecision::revise("use tomato"));
        let shown = String::from_utf8(out).unwrap();
        assert!(shown.contains("OpenObject(Fridge_1)"));
        assert!(shown.contains("Approve? [y/n] "));
        let d = TerminalPrompter::new(b"".as_slice(), Vec::new()).decide(&ctx("OpenObject(Fridge_1)"));
        assert_eq!(d, FeedbackDecision::Approve);
    }

    #[test]
    fn oracle_rejects_failing_dry_run() {
        let goal = Goal::Exists(FlagTest {
            kind: "Fridge".into(),
            flag: StateFlag::Open,
            value: true,
        });
        let mut src = FeedbackSource::Oracle(Oracle::new(goal));
        assert_eq!(src.decide(&ctx("OpenObject(Fridge_1)")), FeedbackDecision::Approve);
        match src.decide(&ctx("OpenObject(Fridge_1)\nOpenObject(Fridge_1)")) {
            FeedbackDecision::Revise { text } => assert!(text.contains("already open"), "{text}"),
            d => panic!("{d:?}"),
        }
        match src.decide(&ctx("CloseObject(Fridge_1)")) {
            FeedbackDecision::Revise { .. } => {}
            d => panic!("{d:?}"),
        }
    }

    #[test]
    fn scripted_then_approve() {
        let mut src = FeedbackSource::scripted([FeedbackDecision::revise("x")]);
        assert_eq!(src.decide(&ctx("OpenObject(Fridge_1)")), FeedbackDecision::revise("x"));
        assert_eq!(src.decide(&ctx("OpenObject(Fridge_1)")), FeedbackDecision::Approve);
    }
}
