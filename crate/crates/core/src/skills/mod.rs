//! Skill definitions, expansion into atomic actions, plan execution and goals.

mod executor;
mod goal;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{ActionKind, AgentId, AtomicAction, ErrorKind};

pub use executor::{execute_plan, execute_plan_with, ActionGate, ActionOutcome, ExecutionTrace, Outcome, StepRecord};
pub use goal::{evaluate_goal, goal_satisfied, FlagTest, Goal, GoalEvaluation, InTest};

/// Role of a skill parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Role {
    ObjectId,
    ToolObjectId,
    CanBeUsedUpDetergentId,
    ReceptacleObjectId,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::ObjectId => "objectId",
            Role::ToolObjectId => "toolObjectId",
            Role::CanBeUsedUpDetergentId => "canBeUsedUpDetergentId",
            Role::ReceptacleObjectId => "receptacleObjectId",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionTemplate {
    pub action: ActionKind,
    pub args: Vec<Role>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkillDef {
    pub name: String,
    pub title: String,
    pub params: Vec<Role>,
    pub expansion: Vec<ActionTemplate>,
}

fn role_list(roles: &[Role]) -> String {
    roles.iter().map(|r| r.name()).collect::<Vec<_>>().join(", ")
}

impl SkillDef {
    /// `Name(role, ...)`
    pub fn signature(&self) -> String {
        format!("{}({})", self.name, role_list(&self.params))
    }

    /// `Name(roles) = Action(roles) -> ...`, the form used by the golden file and prompts.
    pub fn expansion_line(&self) -> String {
        let steps: Vec<String> = self
            .expansion
            .iter()
            .map(|t| format!("{}({})", t.action, role_list(&t.args)))
            .collect();
        format!("{} = {}", self.signature(), steps.join(" -> "))
    }

    pub fn action_kinds(&self) -> impl Iterator<Item = ActionKind> + '_ {
        self.expansion.iter().map(|t| t.action)
    }
}

/// A skill call in a plan. `skill` is kept as text so unknown names survive parsing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SkillInvocation {
    pub skill: String,
    pub args: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<AgentId>,
}

impl SkillInvocation {
    pub fn new(skill: impl Into<String>, args: &[&str]) -> Self {
        SkillInvocation {
            skill: skill.into(),
            args: args.iter().map(|a| a.to_string()).collect(),
            agent: None,
        }
    }

    pub fn with_agent(mut self, agent: AgentId) -> Self {
        self.agent = Some(agent);
        self
    }
}

impl fmt::Display for SkillInvocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(a) = self.agent {
            write!(f, "{a}: ")?;
        }
        write!(f, "{}({})", self.skill, self.args.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SkillError {
    #[error("unknown skill {0}")]
    UnknownSkill(String),
    #[error("{skill} expects {expected} argument(s), got {got}")]
    ArityMismatch { skill: String, expected: usize, got: usize },
}

impl SkillError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            SkillError::UnknownSkill(_) => ErrorKind::UnknownSkill,
            SkillError::ArityMismatch { .. } => ErrorKind::ArityMismatch,
        }
    }
}

#[derive(Debug, Error)]
pub enum SkillTableError {
    #[error("invalid skill table: {0}")]
    Json(#[from] serde_json::Error),
    #[error("skill {skill}: {message}")]
    Invalid { skill: String, message: String },
}

#[derive(Debug, Deserialize)]
struct SkillFile {
    version: u32,
    skills: Vec<SkillDef>,
}

/// The set of skills the planner may call, in table order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkillTable {
    skills: Vec<SkillDef>,
    by_name: BTreeMap<String, usize>,
}

impl SkillTable {
    pub fn from_json(text: &str) -> Result<SkillTable, SkillTableError> {
        let file: SkillFile = serde_json::from_str(text)?;
        if file.version != 1 {
            return Err(SkillTableError::Invalid {
                skill: String::new(),
                message: format!("unsupported version {}", file.version),
            });
        }
        let mut by_name = BTreeMap::new();
        for (i, def) in file.skills.iter().enumerate() {
            let invalid = |message: String| SkillTableError::Invalid {
                skill: def.name.clone(),
                message,
            };
            if by_name.insert(def.name.clone(), i).is_some() {
                return Err(invalid("defined twice".into()));
            }
            for t in &def.expansion {
                if t.args.len() != t.action.arity() {
                    return Err(invalid(format!("{} takes {} argument(s)", t.action, t.action.arity())));
                }
                if let Some(r) = t.args.iter().find(|r| !def.params.contains(r)) {
                    return Err(invalid(format!("placeholder {} is not a parameter", r.name())));
                }
            }
        }
        Ok(SkillTable {
            skills: file.skills,
            by_name,
        })
    }

    /// The shipped table.
    pub fn bundled() -> &'static SkillTable {
        static TABLE: OnceLock<SkillTable> = OnceLock::new();
        TABLE.get_or_init(|| SkillTable::from_json(crate::fixtures::SKILLS_JSON).expect("bundled skill table"))
    }

    pub fn get(&self, name: &str) -> Option<&SkillDef> {
        self.by_name.get(name).map(|&i| &self.skills[i])
    }

    pub fn skills(&self) -> &[SkillDef] {
        &self.skills
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.skills.iter().map(|s| s.name.as_str())
    }

    /// One expansion line per skill, newline-terminated.
    pub fn render(&self) -> String {
        self.skills.iter().map(|s| s.expansion_line() + "\n").collect()
    }

    /// The definition for `inv` after checking name and arity.
    pub fn resolve(&self, inv: &SkillInvocation) -> Result<&SkillDef, SkillError> {
        let def = self
            .get(&inv.skill)
            .ok_or_else(|| SkillError::UnknownSkill(inv.skill.clone()))?;
        if def.params.len() != inv.args.len() {
            return Err(SkillError::ArityMismatch {
                skill: inv.skill.clone(),
                expected: def.params.len(),
                got: inv.args.len(),
            });
        }
        Ok(def)
    }

    /// Binds an invocation's arguments into its atomic-action sequence.
    pub fn expand(&self, inv: &SkillInvocation) -> Result<Vec<AtomicAction>, SkillError> {
        let def = self.resolve(inv)?;
        let bind = |r: &Role| {
            let i = def.params.iter().position(|p| p == r).expect("checked at load");
            inv.args[i].clone()
        };
        Ok(def
            .expansion
            .iter()
            .map(|t| {
                let ids: Vec<String> = t.args.iter().map(bind).collect();
                AtomicAction::from_parts(t.action, &ids).expect("arity checked at load")
            })
            .collect())
    }
}

/// [`SkillTable::expand`] on the bundled table.
pub fn expand(inv: &SkillInvocation) -> Result<Vec<AtomicAction>, SkillError> {
    SkillTable::bundled().expand(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slice_binds_tool_into_atomic() {
        let acts = expand(&SkillInvocation::new("SliceObject", &["Apple_1", "Knife_1"])).unwrap();
        let text: Vec<String> = acts.iter().map(|a| a.to_string()).collect();
        assert_eq!(
            text,
            [
                "GoToObject(Knife_1)",
                "PickUpObject(Knife_1)",
                "GoToObject(Apple_1)",
                "SliceObject(Apple_1, Knife_1)",
                "ThrowObject(Knife_1)"
            ]
        );
    }

    #[test]
    fn arity_and_unknown() {
        assert_eq!(
            expand(&SkillInvocation::new("SliceObject", &["Apple_1"])).unwrap_err().kind(),
            ErrorKind::ArityMismatch
        );
        assert_eq!(
            expand(&SkillInvocation::new("MicrowaveObject", &["Egg_1"])).unwrap_err().kind(),
            ErrorKind::UnknownSkill
        );
    }

    #[test]
    fn table_rejects_stray_placeholders() {
        let bad = r#"{"version":1,"skills":[{"name":"X","title":"x","params":["objectId"],
            "expansion":[{"action":"GoToObject","args":["toolObjectId"]}]}]}"#;
        assert!(matches!(SkillTable::from_json(bad), Err(SkillTableError::Invalid { .. })));
    }
}
