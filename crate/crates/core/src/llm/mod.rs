//! Chat backends: live HTTP, scripted mock with fault injection, record and replay.

mod live;
mod mock;
mod transcript;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use live::{LiveBackend, LiveConfig};
pub use mock::{apply_defect, DefectKind, FaultPlan, FaultStage, MockBackend, MockEntry, MockScript};
pub use transcript::{RecordingBackend, ReplayBackend, Transcript, TranscriptRecord, TranscriptWriter};

/// Which pipeline step issued a request. Part of the replay key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Decompose1,
    Decompose2,
    Codegen,
    Repair,
    Revise,
    Refine,
    Allocate,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Decompose1,
        Stage::Decompose2,
        Stage::Codegen,
        Stage::Repair,
        Stage::Revise,
        Stage::Refine,
        Stage::Allocate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Decompose1 => "decompose1",
            Stage::Decompose2 => "decompose2",
            Stage::Codegen => "codegen",
            Stage::Repair => "repair",
            Stage::Revise => "revise",
            Stage::Refine => "refine",
            Stage::Allocate => "allocate",
        }
    }

    /// Stages whose reply carries a plan script.
    pub fn bears_plan(self) -> bool {
        matches!(self, Stage::Codegen | Stage::Repair | Stage::Revise | Stage::Refine)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown stage {s}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: Role::User,
            content: content.into(),
        }
    }
}

pub const DEFAULT_MODEL: &str = "gpt-4o";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChatRequest {
    pub stage: Stage,
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub fn new(stage: Stage, system: impl Into<String>, user: impl Into<String>) -> Self {
        ChatRequest {
            stage,
            model: DEFAULT_MODEL.to_string(),
            messages: vec![Message::system(system), Message::user(user)],
            temperature: 0.0,
            max_tokens: 1024,
        }
    }

    pub fn check(&self) -> Result<(), LlmError> {
        match self.messages.first() {
            None => Err(LlmError::InvalidRequest("messages must not be empty".into())),
            Some(m) if m.role != Role::System => {
                Err(LlmError::InvalidRequest("the first message must have role system".into()))
            }
            Some(_) => Ok(()),
        }
    }

    /// Content of the last user message.
    pub fn user_text(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or("")
    }

    /// Rendered prompt with every whitespace run collapsed to one space.
    pub fn normalized_prompt(&self) -> String {
        let mut out = String::new();
        for m in &self.messages {
            let role = match m.role {
                Role::System => "system:",
                Role::User => "user:",
                Role::Assistant => "assistant:",
            };
            out.push_str(role);
            for word in m.content.split_whitespace() {
                out.push(' ');
                out.push_str(word);
            }
            out.push(' ');
        }
        out.truncate(out.trim_end().len());
        out
    }

    /// Replay key: hex sha256 of the stage tag and the normalized prompt.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.stage.as_str().as_bytes());
        h.update(b"\n");
        h.update(self.normalized_prompt().as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("missing credential: environment variable {0} is not set")]
    MissingCredential(String),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    BadResponse(String),
    #[error("mock script exhausted for stage {stage}")]
    MockExhausted { stage: Stage },
    #[error("no recorded reply for stage {stage} (hash {hash}); the prompt has drifted from the transcript")]
    ReplayMiss { stage: Stage, hash: String },
    #[error("transcript i/o: {0}")]
    Io(String),
}

/// A chat-completion provider. Implementations are shared across sessions.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError>;
}

impl<T: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<T> {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        (**self).complete(request)
    }
}

impl<T: ChatBackend + ?Sized> ChatBackend for Box<T> {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        (**self).complete(request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_cosmetic_whitespace() {
        let a = ChatRequest::new(Stage::Codegen, "sys", "plan  the\n\ntask ");
        let b = ChatRequest::new(Stage::Codegen, "sys ", "plan the task");
        assert_eq!(a.hash(), b.hash());
        let c = ChatRequest::new(Stage::Refine, "sys", "plan the task");
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn empty_messages_are_rejected() {
        let mut r = ChatRequest::new(Stage::Codegen, "s", "u");
        r.messages.clear();
        assert!(matches!(r.check(), Err(LlmError::InvalidRequest(_))));
    }
}
