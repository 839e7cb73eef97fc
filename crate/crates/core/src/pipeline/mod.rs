//! The planning session: two-stage decomposition, plan generation with
//! feedback, execution with error-driven refinement, then allocation.
//!
//! ```text
//! Decompose1 -> Decompose2 -> Codegen -> AwaitFeedback <-> Codegen
//!   -> Execute <-> Refine -> Allocate -> Done
//! ```
//!
//! Any phase may end in `Failed`.

mod decompose;
mod events;
mod feedback;
mod render;
mod session;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use decompose::{extract_kinds, parse_decomposition, Decomposition, KindMatches};
pub use events::{Clock, Event, EventSink, FixedClock, SystemClock};
pub use feedback::{
    FeedbackContext, FeedbackDecision, FeedbackSource, Oracle, OracleVerdict, Preference, Prompter, TerminalPrompter,
};
pub use render::{render_entities, render_kind_summary};
pub use session::{AllocationRecord, Session, SessionConfig, SessionState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Decompose1,
    Decompose2,
    Codegen,
    AwaitFeedback,
    Execute,
    Refine,
    Allocate,
    Done,
    Failed,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Done | Phase::Failed)
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::Decompose1 => "Decompose1",
            Phase::Decompose2 => "Decompose2",
            Phase::Codegen => "Codegen",
            Phase::AwaitFeedback => "AwaitFeedback",
            Phase::Execute => "Execute",
            Phase::Refine => "Refine",
            Phase::Allocate => "Allocate",
            Phase::Done => "Done",
            Phase::Failed => "Failed",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Budgets {
    pub max_feedback: u32,
    pub max_refine: u32,
}

impl Budgets {
    pub fn uniform(k: u32) -> Budgets {
        Budgets {
            max_feedback: k,
            max_refine: k,
        }
    }
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets::uniform(5)
    }
}

/// Retries allowed for a malformed decomposition reply.
pub const DECOMPOSE_REASKS: u32 = 2;
/// Internal repair prompts allowed per generated plan. Not counted as feedback.
pub const REPAIR_BUDGET: u32 = 2;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PipelineError {
    #[error("instruction must not be empty")]
    EmptyInstruction,
    #[error("session is in phase {actual}, expected {expected}")]
    WrongPhase { expected: Phase, actual: Phase },
    #[error("revision feedback must not be empty")]
    EmptyFeedback,
}
