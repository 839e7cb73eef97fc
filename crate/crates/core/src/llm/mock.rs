use std::collections::BTreeMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ChatBackend, ChatRequest, LlmError, Stage};
use crate::planscript::{extract_fenced, parse, serialize, PlanScript};
use crate::world::AgentId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockEntry {
    #[serde(alias = "stageTag")]
    pub stage: Stage,
    pub reply: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DefectKind {
    UnknownSkill,
    UnknownObject,
    PreconditionDefect,
}

/// Where a fault is cleared. Each variant counts requests of one stage:
/// `codegen` counts repair prompts, `feedback` counts revisions and `refine`
/// counts refinements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaultStage {
    Codegen,
    Feedback,
    Refine,
}

impl FaultStage {
    pub fn counted_stage(self) -> Stage {
        match self {
            FaultStage::Codegen => Stage::Repair,
            FaultStage::Feedback => Stage::Revise,
            FaultStage::Refine => Stage::Refine,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FaultPlan {
    pub stage: FaultStage,
    pub defect_kind: DefectKind,
    pub clear_after: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MockScript {
    pub entries: Vec<MockEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault_plan: Option<FaultPlan>,
}

impl MockScript {
    pub fn with_fault(mut self, fault: FaultPlan) -> Self {
        self.fault_plan = Some(fault);
        self
    }
}

#[derive(Debug, Default)]
struct MockState {
    cursor: BTreeMap<Stage, usize>,
    requests: BTreeMap<Stage, u32>,
    last_clean_plan: Option<String>,
}

/// Serves scripted replies per stage, in order.
///
/// Plan-bearing stages other than `codegen` fall back to the last clean plan
/// when they have no scripted entries; `allocate` without entries echoes the
/// prompt's plan with every line tagged `robot:`. While the fault stage has
/// seen fewer than `clearAfter` requests, every plan-bearing reply carries
/// the configured defect.
#[derive(Debug)]
pub struct MockBackend {
    queues: BTreeMap<Stage, Vec<String>>,
    fault: Option<FaultPlan>,
    state: Mutex<MockState>,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        let mut queues: BTreeMap<Stage, Vec<String>> = BTreeMap::new();
        for e in script.entries {
            queues.entry(e.stage).or_default().push(e.reply);
        }
        MockBackend {
            queues,
            fault: script.fault_plan,
            state: Mutex::new(MockState::default()),
        }
    }

    /// Requests served so far for `stage`.
    pub fn request_count(&self, stage: Stage) -> u32 {
        self.state.lock().unwrap().requests.get(&stage).copied().unwrap_or(0)
    }
}

fn fence(plan: &PlanScript) -> String {
    format!("```\n{}```\n", serialize(plan))
}

impl ChatBackend for MockBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        request.check()?;
        let stage = request.stage;
        let mut st = self.state.lock().unwrap();
        *st.requests.entry(stage).or_default() += 1;

        let scripted = self.queues.get(&stage);
        let cursor = st.cursor.entry(stage).or_default();
        let reply = match scripted {
            Some(q) if *cursor < q.len() => {
                *cursor += 1;
                q[*cursor - 1].clone()
            }
            Some(_) => return Err(LlmError::MockExhausted { stage }),
            None if stage == Stage::Allocate => {
                let (body, _) = extract_fenced(request.user_text());
                let mut plan = parse(body).map_err(|_| LlmError::MockExhausted { stage })?;
                plan.invocations.iter_mut().for_each(|i| i.agent = Some(AgentId::Robot));
                fence(&plan)
            }
            None if stage.bears_plan() && stage != Stage::Codegen => st
                .last_clean_plan
                .clone()
                .ok_or(LlmError::MockExhausted { stage })?,
            None => return Err(LlmError::MockExhausted { stage }),
        };

        if !stage.bears_plan() {
            return Ok(reply);
        }
        st.last_clean_plan = Some(reply.clone());
        match self.fault {
            Some(f) if st.requests.get(&f.stage.counted_stage()).copied().unwrap_or(0) < f.clear_after => {
                Ok(apply_defect(&reply, f.defect_kind))
            }
            _ => Ok(reply),
        }
    }
}

fn kind_of(id: &str) -> &str {
    id.rsplit_once('_').map(|(k, _)| k).unwrap_or(id)
}

const STATE_CHANGING: [&str; 7] = [
    "OpenObject",
    "CloseObject",
    "BreakObject",
    "SwitchOn",
    "SwitchOff",
    "SliceObject",
    "CleanObject",
];

/// Injects a defect into the first plan found in `reply`. Replies without a
/// parseable, non-empty plan are returned unchanged.
pub fn apply_defect(reply: &str, kind: DefectKind) -> String {
    let (body, _) = extract_fenced(reply);
    let Ok(mut plan) = parse(body) else {
        return reply.to_string();
    };
    if plan.invocations.is_empty() {
        return reply.to_string();
    }
    match kind {
        DefectKind::UnknownSkill => plan.invocations[0].skill = "MicrowaveObject".into(),
        DefectKind::UnknownObject => {
            let first = &mut plan.invocations[0].args[0];
            *first = format!("{}_99", kind_of(first));
        }
        DefectKind::PreconditionDefect => {
            match plan
                .invocations
                .iter()
                .position(|i| STATE_CHANGING.contains(&i.skill.as_str()))
            {
                Some(at) => {
                    let dup = plan.invocations[at].clone();
                    plan.invocations.insert(at + 1, dup);
                }
                None => {
                    let target = plan.invocations[0].args[0].clone();
                    let open = crate::skills::SkillInvocation {
                        skill: "OpenObject".into(),
                        args: vec![target],
                        agent: None,
                    };
                    plan.invocations.insert(0, open.clone());
                    plan.invocations.insert(0, open);
                }
            }
        }
    }
    fence(&plan)
}
