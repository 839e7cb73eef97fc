//! The line-oriented skill-script language.
//!
//! ```text
//! plan       := line*
//! line       := comment | invocation
//! invocation := [agent ":"] skillName "(" id ("," id)* ")"
//! agent      := "robot" | "human"
//! ```
//!
//! The first `# task: <description>` comment becomes the task description;
//! other comments and blank lines are ignored.

mod parser;
mod validate;

use serde::{Deserialize, Serialize};

use crate::skills::SkillInvocation;

pub use parser::{parse, SyntaxError};
pub use validate::{validate, validate_with, IssueKind, ValidationIssue, ValidationReport};

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlanScript {
    pub task_description: String,
    pub invocations: Vec<SkillInvocation>,
}

impl PlanScript {
    pub fn new(task_description: impl Into<String>, invocations: Vec<SkillInvocation>) -> Self {
        PlanScript {
            task_description: task_description.into(),
            invocations,
        }
    }

    pub fn len(&self) -> usize {
        self.invocations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.invocations.is_empty()
    }

    /// Copy with every agent tag removed.
    pub fn untagged(&self) -> PlanScript {
        let mut p = self.clone();
        p.invocations.iter_mut().for_each(|i| i.agent = None);
        p
    }
}

/// Line of invocation `index` in the canonical text.
pub fn canonical_line(index: usize) -> usize {
    index + 2
}

/// Canonical text: the header, then one invocation per line.
pub fn serialize(plan: &PlanScript) -> String {
    let desc: String = plan
        .task_description
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ");
    let mut out = format!("# task: {desc}\n");
    for inv in &plan.invocations {
        out.push_str(&inv.to_string());
        out.push('\n');
    }
    out
}

/// The body of the first fenced code block, or the whole reply when there is none.
/// The flag reports whether a fence was found.
pub fn extract_fenced(reply: &str) -> (&str, bool) {
    let Some(open) = reply.find("```") else {
        return (reply, false);
    };
    let after = &reply[open + 3..];
    let body_start = after.find('\n').map(|i| i + 1).unwrap_or(after.len());
    let body = &after[body_start..];
    match body.find("```") {
        Some(close) => (&body[..close], true),
        None => (body, true),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::AgentId;

    #[test]
    fn empty_plan_serializes_to_header() {
        assert_eq!(serialize(&PlanScript::new("noop", vec![])), "# task: noop\n");
    }

    #[test]
    fn agent_prefix_is_kept() {
        let p = PlanScript::new(
            "t",
            vec![SkillInvocation::new("OpenObject", &["Fridge_1"]).with_agent(AgentId::Robot)],
        );
        assert_eq!(serialize(&p), "# task: t\nrobot: OpenObject(Fridge_1)\n");
        assert_eq!(parse(&serialize(&p)).unwrap(), p);
    }

    #[test]
    fn fence_extraction() {
        let reply = "Here you go:\n```python\nOpenObject(Fridge_1)\n```\nthanks";
        assert_eq!(extract_fenced(reply), ("OpenObject(Fridge_1)\n", true));
        assert_eq!(extract_fenced("OpenObject(Fridge_1)"), ("OpenObject(Fridge_1)", false));
    }
}
