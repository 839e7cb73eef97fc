use serde::Serialize;

use super::{SkillInvocation, SkillTable};
use crate::planscript::PlanScript;
use crate::world::{apply_action, ActionKind, AgentId, AtomicAction, ErrorKind, ExecutionError, Scene};

/// Per-agent permission to perform an atomic action.
pub trait ActionGate: Sync {
    fn permits(&self, agent: AgentId, action: ActionKind) -> bool;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ActionOutcome {
    pub action: AtomicAction,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ExecutionError>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StepRecord {
    pub invocation: SkillInvocation,
    pub agent: AgentId,
    pub outcomes: Vec<ActionOutcome>,
    /// Scene after this step, or after the last successful action of a failed step.
    #[serde(skip)]
    pub scene_after: Scene,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", content = "error", rename_all = "lowercase")]
pub enum Outcome {
    Success,
    Failed(ExecutionError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ExecutionTrace {
    pub steps: Vec<StepRecord>,
    pub final_scene: Scene,
    pub outcome: Outcome,
}

impl ExecutionTrace {
    pub fn is_success(&self) -> bool {
        matches!(self.outcome, Outcome::Success)
    }

    pub fn error(&self) -> Option<&ExecutionError> {
        match &self.outcome {
            Outcome::Success => None,
            Outcome::Failed(e) => Some(e),
        }
    }

    /// Agents that performed each step, in order.
    pub fn agents(&self) -> Vec<AgentId> {
        self.steps.iter().map(|s| s.agent).collect()
    }
}

/// Runs `plan` on the bundled skill table with a single unrestricted agent.
pub fn execute_plan(scene: &Scene, plan: &PlanScript, default_agent: AgentId) -> ExecutionTrace {
    execute_plan_with(SkillTable::bundled(), scene, &plan.invocations, default_agent, None)
}

/// Runs invocations in order, stopping at the first failing atomic action.
///
/// Each invocation runs under its own agent tag, or `default_agent` when
/// untagged. With a `gate`, an agent asked to perform an action it lacks fails
/// with `MissingCapability` once the action's objects are known to exist.
pub fn execute_plan_with(
    table: &SkillTable,
    scene: &Scene,
    invocations: &[SkillInvocation],
    default_agent: AgentId,
    gate: Option<&dyn ActionGate>,
) -> ExecutionTrace {
    let mut current = scene.clone();
    let mut steps = Vec::with_capacity(invocations.len());
    for (i, inv) in invocations.iter().enumerate() {
        let agent = inv.agent.unwrap_or(default_agent);
        let actions = match table.expand(inv) {
            Ok(a) => a,
            Err(e) => {
                let err = ExecutionError::new(i, 0, inv.skill.clone(), inv.args.clone(), e.kind(), e.to_string());
                return ExecutionTrace {
                    steps,
                    final_scene: current,
                    outcome: Outcome::Failed(err),
                };
            }
        };
        current.consumed_this_skill.clear();
        let mut outcomes = Vec::with_capacity(actions.len());
        let mut failure = None;
        for (j, action) in actions.into_iter().enumerate() {
            let result = match gate {
                Some(g)
                    if action.ids().iter().all(|id| current.objects.contains_key(*id))
                        && !g.permits(agent, action.kind()) =>
                {
                    Err(ExecutionError::new(
                        i,
                        j,
                        action.kind().name(),
                        action.ids().into_iter().map(String::from).collect(),
                        ErrorKind::MissingCapability,
                        format!("{agent} cannot perform {}", action.kind()),
                    ))
                }
                _ => apply_action(&current, agent, &action).map_err(|e| ExecutionError::from_action(i, j, &e)),
            };
            match result {
                Ok(next) => {
                    current = next;
                    outcomes.push(ActionOutcome { action, error: None });
                }
                Err(e) => {
                    outcomes.push(ActionOutcome {
                        action,
                        error: Some(e.clone()),
                    });
                    failure = Some(e);
                    break;
                }
            }
        }
        current.consumed_this_skill.clear();
        steps.push(StepRecord {
            invocation: inv.clone(),
            agent,
            outcomes,
            scene_after: current.clone(),
        });
        if let Some(e) = failure {
            return ExecutionTrace {
                steps,
                final_scene: current,
                outcome: Outcome::Failed(e),
            };
        }
    }
    ExecutionTrace {
        steps,
        final_scene: current,
        outcome: Outcome::Success,
    }
}
