use serde::Serialize;

use super::{canonical_line, PlanScript};
use crate::skills::{SkillError, SkillTable};
use crate::world::Scene;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IssueKind {
    UnknownSkill,
    UnknownObject,
    ArityMismatch,
    BadAgentTag,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationIssue {
    /// Line in the canonical serialization.
    pub line: usize,
    pub kind: IssueKind,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }

    /// One issue per line, `line <n>: <kind>: <detail>`.
    pub fn render(&self) -> String {
        self.issues
            .iter()
            .map(|i| format!("line {}: {:?}: {}\n", i.line, i.kind, i.detail))
            .collect()
    }
}

pub fn validate(plan: &PlanScript, scene: &Scene) -> ValidationReport {
    validate_with(SkillTable::bundled(), plan, scene)
}

/// Static checks against a scene: skill names, arity, object ids and agent tags.
pub fn validate_with(table: &SkillTable, plan: &PlanScript, scene: &Scene) -> ValidationReport {
    let mut issues = Vec::new();
    for (i, inv) in plan.invocations.iter().enumerate() {
        let line = canonical_line(i);
        let mut push = |kind, detail: String| issues.push(ValidationIssue { line, kind, detail });
        if let Some(a) = inv.agent {
            if !scene.agents.contains_key(&a) {
                push(IssueKind::BadAgentTag, format!("agent {a} is not present in scene {}", scene.id));
            }
        }
        match table.resolve(inv) {
            Ok(_) => {}
            Err(e @ SkillError::UnknownSkill(_)) => push(IssueKind::UnknownSkill, e.to_string()),
            Err(e @ SkillError::ArityMismatch { .. }) => push(IssueKind::ArityMismatch, e.to_string()),
        }
        for id in &inv.args {
            if !scene.objects.contains_key(id) {
                push(IssueKind::UnknownObject, format!("object {id} does not exist in scene {}", scene.id));
            }
        }
    }
    ValidationReport { issues }
}
