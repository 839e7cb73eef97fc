use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::Phase;

/// One entry of a session's append-only history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub timestamp: String,
    pub phase: Phase,
    pub event: String,
    pub payload: Value,
}

impl Event {
    /// `done` and `failed` close a session's log.
    pub fn is_terminal(&self) -> bool {
        self.event == "done" || self.event == "failed"
    }
}

/// Time source for event timestamps.
pub trait Clock: Send + Sync {
    fn now(&self) -> String;
}

/// Wall-clock UTC, RFC 3339 with milliseconds.
#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> String {
        chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
    }
}

/// Always the same instant. Makes histories reproducible.
#[derive(Debug, Clone)]
pub struct FixedClock(pub String);

impl Default for FixedClock {
    fn default() -> Self {
        FixedClock("1970-01-01T00:00:00.000Z".into())
    }
}

impl Clock for FixedClock {
    fn now(&self) -> String {
        self.0.clone()
    }
}

/// Observer called with every event as it is appended.
pub type EventSink = Arc<dyn Fn(&Event) + Send + Sync>;
