use std::fmt;

use serde::{Deserialize, Serialize};

use super::AtomicAction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorKind {
    UnknownObject,
    UnknownSkill,
    PreconditionFailed,
    MissingCapability,
    ReceptacleClosed,
    HandOccupied,
    HandEmpty,
    DetergentUsedUp,
    NotSharpTool,
    ArityMismatch,
}

impl ErrorKind {
    pub fn name(self) -> &'static str {
        match self {
            ErrorKind::UnknownObject => "UnknownObject",
            ErrorKind::UnknownSkill => "UnknownSkill",
            ErrorKind::PreconditionFailed => "PreconditionFailed",
            ErrorKind::MissingCapability => "MissingCapability",
            ErrorKind::ReceptacleClosed => "ReceptacleClosed",
            ErrorKind::HandOccupied => "HandOccupied",
            ErrorKind::HandEmpty => "HandEmpty",
            ErrorKind::DetergentUsedUp => "DetergentUsedUp",
            ErrorKind::NotSharpTool => "NotSharpTool",
            ErrorKind::ArityMismatch => "ArityMismatch",
        }
    }

    /// Errors detectable without running the plan.
    pub fn is_static(self) -> bool {
        matches!(
            self,
            ErrorKind::UnknownObject | ErrorKind::UnknownSkill | ErrorKind::ArityMismatch
        )
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A failed precondition of a single atomic action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionError {
    pub kind: ErrorKind,
    pub action: AtomicAction,
    pub detail: String,
}

impl ActionError {
    pub(crate) fn new(kind: ErrorKind, action: &AtomicAction, detail: impl Into<String>) -> Self {
        ActionError {
            kind,
            action: action.clone(),
            detail: detail.into(),
        }
    }
}

impl fmt::Display for ActionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} failed: {}: {}", self.action, self.kind, self.detail)
    }
}

impl std::error::Error for ActionError {}

/// A located failure inside a plan execution.
///
/// `message` is a pure function of the other fields and is embedded verbatim
/// in refinement prompts:
/// `step <i> action <j>: <ActionName>(<ids>) failed: <kind>: <detail>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExecutionError {
    pub step_index: usize,
    pub action_index: usize,
    /// Atomic action name, or the skill name for skill-level failures.
    pub action: String,
    pub objects: Vec<String>,
    pub kind: ErrorKind,
    pub detail: String,
    pub message: String,
}

impl ExecutionError {
    pub fn new(
        step_index: usize,
        action_index: usize,
        action: impl Into<String>,
        objects: Vec<String>,
        kind: ErrorKind,
        detail: impl Into<String>,
    ) -> Self {
        let action = action.into();
        let detail = detail.into();
        let message = render_message(step_index, action_index, &action, &objects, kind, &detail);
        ExecutionError {
            step_index,
            action_index,
            action,
            objects,
            kind,
            detail,
            message,
        }
    }

    pub fn from_action(step_index: usize, action_index: usize, err: &ActionError) -> Self {
        ExecutionError::new(
            step_index,
            action_index,
            err.action.kind().name(),
            err.action.ids().into_iter().map(String::from).collect(),
            err.kind,
            err.detail.clone(),
        )
    }
}

impl fmt::Display for ExecutionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for ExecutionError {}

fn render_message(
    step: usize,
    action_index: usize,
    action: &str,
    objects: &[String],
    kind: ErrorKind,
    detail: &str,
) -> String {
    format!(
        "step {step} action {action_index}: {action}({}) failed: {kind}: {detail}",
        objects.join(", ")
    )
}
