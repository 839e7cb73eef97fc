use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The twelve primitive operations an agent can perform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    GoToObject,
    OpenObject,
    CloseObject,
    BreakObject,
    SliceObject,
    SwitchOn,
    SwitchOff,
    CleanObject,
    PickUpObject,
    PutObject,
    ThrowObject,
    UseUpObject,
}

impl ActionKind {
    pub const ALL: [ActionKind; 12] = [
        ActionKind::GoToObject,
        ActionKind::OpenObject,
        ActionKind::CloseObject,
        ActionKind::BreakObject,
        ActionKind::SliceObject,
        ActionKind::SwitchOn,
        ActionKind::SwitchOff,
        ActionKind::CleanObject,
        ActionKind::PickUpObject,
        ActionKind::PutObject,
        ActionKind::ThrowObject,
        ActionKind::UseUpObject,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActionKind::GoToObject => "GoToObject",
            ActionKind::OpenObject => "OpenObject",
            ActionKind::CloseObject => "CloseObject",
            ActionKind::BreakObject => "BreakObject",
            ActionKind::SliceObject => "SliceObject",
            ActionKind::SwitchOn => "SwitchOn",
            ActionKind::SwitchOff => "SwitchOff",
            ActionKind::CleanObject => "CleanObject",
            ActionKind::PickUpObject => "PickUpObject",
            ActionKind::PutObject => "PutObject",
            ActionKind::ThrowObject => "ThrowObject",
            ActionKind::UseUpObject => "UseUpObject",
        }
    }

    /// Number of object arguments.
    pub fn arity(self) -> usize {
        match self {
            ActionKind::SliceObject => 2,
            ActionKind::CleanObject => 3,
            _ => 1,
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActionKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown atomic action {s}"))
    }
}

/// An atomic action with its object ids bound.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "action", content = "args")]
pub enum AtomicAction {
    GoToObject(String),
    OpenObject(String),
    CloseObject(String),
    BreakObject(String),
    SliceObject(String, String),
    SwitchOn(String),
    SwitchOff(String),
    CleanObject(String, String, String),
    PickUpObject(String),
    PutObject(String),
    ThrowObject(String),
    UseUpObject(String),
}

impl AtomicAction {
    /// Builds an action from its kind and positional ids.
    pub fn from_parts(kind: ActionKind, ids: &[String]) -> Option<AtomicAction> {
        if ids.len() != kind.arity() {
            return None;
        }
        let a = |i: usize| ids[i].clone();
        Some(match kind {
            ActionKind::GoToObject => AtomicAction::GoToObject(a(0)),
            ActionKind::OpenObject => AtomicAction::OpenObject(a(0)),
            ActionKind::CloseObject => AtomicAction::CloseObject(a(0)),
            ActionKind::BreakObject => AtomicAction::BreakObject(a(0)),
            ActionKind::SliceObject => AtomicAction::SliceObject(a(0), a(1)),
            ActionKind::SwitchOn => AtomicAction::SwitchOn(a(0)),
            ActionKind::SwitchOff => AtomicAction::SwitchOff(a(0)),
            ActionKind::CleanObject => AtomicAction::CleanObject(a(0), a(1), a(2)),
            ActionKind::PickUpObject => AtomicAction::PickUpObject(a(0)),
            ActionKind::PutObject => AtomicAction::PutObject(a(0)),
            ActionKind::ThrowObject => AtomicAction::ThrowObject(a(0)),
            ActionKind::UseUpObject => AtomicAction::UseUpObject(a(0)),
        })
    }

    pub fn kind(&self) -> ActionKind {
        match self {
            AtomicAction::GoToObject(_) => ActionKind::GoToObject,
            AtomicAction::OpenObject(_) => ActionKind::OpenObject,
            AtomicAction::CloseObject(_) => ActionKind::CloseObject,
            AtomicAction::BreakObject(_) => ActionKind::BreakObject,
            AtomicAction::SliceObject(..) => ActionKind::SliceObject,
            AtomicAction::SwitchOn(_) => ActionKind::SwitchOn,
            AtomicAction::SwitchOff(_) => ActionKind::SwitchOff,
            AtomicAction::CleanObject(..) => ActionKind::CleanObject,
            AtomicAction::PickUpObject(_) => ActionKind::PickUpObject,
            AtomicAction::PutObject(_) => ActionKind::PutObject,
            AtomicAction::ThrowObject(_) => ActionKind::ThrowObject,
            AtomicAction::UseUpObject(_) => ActionKind::UseUpObject,
        }
    }

    /// Object ids in argument order.
    pub fn ids(&self) -> Vec<&str> {
        match self {
            AtomicAction::SliceObject(o, t) => vec![o, t],
            AtomicAction::CleanObject(o, t, d) => vec![o, t, d],
            AtomicAction::GoToObject(o)
            | AtomicAction::OpenObject(o)
            | AtomicAction::CloseObject(o)
            | AtomicAction::BreakObject(o)
            | AtomicAction::SwitchOn(o)
            | AtomicAction::SwitchOff(o)
            | AtomicAction::PickUpObject(o)
            | AtomicAction::PutObject(o)
            | AtomicAction::ThrowObject(o)
            | AtomicAction::UseUpObject(o) => vec![o],
        }
    }

    /// The object the agent acts on, which is always the first argument.
    pub fn target(&self) -> &str {
        self.ids()[0]
    }
}

impl fmt::Display for AtomicAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.kind(), self.ids().join(", "))
    }
}
