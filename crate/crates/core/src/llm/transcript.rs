use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{ChatBackend, ChatRequest, LlmError, Stage};

/// One line of a transcript file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TranscriptRecord {
    /// Which session of a sweep made the request. Empty for single runs.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub session: String,
    pub hash: String,
    pub stage_tag: Stage,
    /// How many earlier requests with the same hash the recording backend had served.
    #[serde(default)]
    pub occurrence: usize,
    pub request: ChatRequest,
    pub reply: String,
}

/// Appends records as JSON lines. Shared by every recorder of a run.
pub struct TranscriptWriter {
    sink: Mutex<Box<dyn Write + Send>>,
}

impl TranscriptWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<TranscriptWriter, LlmError> {
        let file = File::create(path).map_err(|e| LlmError::Io(e.to_string()))?;
        Ok(TranscriptWriter::new(Box::new(file)))
    }

    pub fn append(path: impl AsRef<Path>) -> Result<TranscriptWriter, LlmError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| LlmError::Io(e.to_string()))?;
        Ok(TranscriptWriter::new(Box::new(file)))
    }

    pub fn new(sink: Box<dyn Write + Send>) -> TranscriptWriter {
        TranscriptWriter { sink: Mutex::new(sink) }
    }

    pub fn write(&self, record: &TranscriptRecord) -> Result<(), LlmError> {
        let mut line = serde_json::to_string(record).map_err(|e| LlmError::Io(e.to_string()))?;
        line.push('\n');
        let mut sink = self.sink.lock().unwrap();
        sink.write_all(line.as_bytes())
            .and_then(|_| sink.flush())
            .map_err(|e| LlmError::Io(e.to_string()))
    }
}

fn next_occurrence(counts: &Mutex<HashMap<String, usize>>, hash: &str) -> usize {
    let mut counts = counts.lock().unwrap();
    let n = counts.entry(hash.to_string()).or_default();
    *n += 1;
    *n - 1
}

/// Wraps a backend and records every successful exchange.
///
/// Use one recorder per session so occurrence indices restart with each session.
pub struct RecordingBackend<B> {
    inner: B,
    writer: Arc<TranscriptWriter>,
    session: String,
    counts: Mutex<HashMap<String, usize>>,
}

impl<B: ChatBackend> RecordingBackend<B> {
    pub fn new(inner: B, writer: Arc<TranscriptWriter>) -> Self {
        RecordingBackend {
            inner,
            writer,
            session: String::new(),
            counts: Mutex::new(HashMap::new()),
        }
    }

    /// Tags every record with `session` so sessions sharing a file stay apart.
    pub fn with_session(mut self, session: impl Into<String>) -> Self {
        self.session = session.into();
        self
    }
}

impl<B: ChatBackend> ChatBackend for RecordingBackend<B> {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let reply = self.inner.complete(request)?;
        let hash = request.hash();
        let occurrence = next_occurrence(&self.counts, &hash);
        self.writer.write(&TranscriptRecord {
            session: self.session.clone(),
            hash,
            stage_tag: request.stage,
            occurrence,
            request: request.clone(),
            reply: reply.clone(),
        })?;
        Ok(reply)
    }
}

/// Replies indexed by (session, hash, occurrence). The first record for a key wins.
#[derive(Debug, Clone, Default)]
pub struct Transcript {
    replies: HashMap<(String, String, usize), String>,
    len: usize,
}

impl Transcript {
    pub fn load(path: impl AsRef<Path>) -> Result<Transcript, LlmError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| LlmError::Io(format!("{}: {e}", path.display())))?;
        let mut t = Transcript::default();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| LlmError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TranscriptRecord = serde_json::from_str(&line)
                .map_err(|e| LlmError::Io(format!("{}:{}: {e}", path.display(), i + 1)))?;
            t.insert(rec);
        }
        Ok(t)
    }

    pub fn insert(&mut self, rec: TranscriptRecord) {
        self.len += 1;
        self.replies
            .entry((rec.session, rec.hash, rec.occurrence))
            .or_insert(rec.reply);
    }

    /// Number of records read, including shadowed duplicates.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Serves replies from a transcript without any backend behind it.
pub struct ReplayBackend {
    transcript: Arc<Transcript>,
    session: String,
    counts: Mutex<HashMap<String, usize>>,
}

impl ReplayBackend {
    pub fn new(transcript: Arc<Transcript>) -> Self {
        ReplayBackend {
            transcript,
            session: String::new(),
            counts: Mutex::new(HashMap::new()),
        }
    }

    /// Serves only the records tagged with `session`.
    pub fn with_session(mut self, session: impl Into<String>) -> Self {
        self.session = session.into();
        self
    }
}

impl ChatBackend for ReplayBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        request.check()?;
        let hash = request.hash();
        let occurrence = next_occurrence(&self.counts, &hash);
        self.transcript
            .replies
            .get(&(self.session.clone(), hash.clone(), occurrence))
            .cloned()
            .ok_or(LlmError::ReplayMiss {
                stage: request.stage,
                hash,
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{MockBackend, MockEntry, MockScript};

    #[test]
    fn record_then_replay() {
        let dir = std::env::temp_dir().join(format!("taskweave-transcript-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.jsonl");
        let mock = MockBackend::new(MockScript {
            entries: vec![
                MockEntry {
                    stage: Stage::Decompose1,
                    reply: "one".into(),
                },
                MockEntry {
                    stage: Stage::Decompose1,
                    reply: "two".into(),
                },
            ],
            fault_plan: None,
        });
        let writer = Arc::new(TranscriptWriter::create(&path).unwrap());
        let rec = RecordingBackend::new(mock, writer);
        let req = ChatRequest::new(Stage::Decompose1, "s", "same prompt");
        assert_eq!(rec.complete(&req).unwrap(), "one");
        assert_eq!(rec.complete(&req).unwrap(), "two");

        let replay = ReplayBackend::new(Arc::new(Transcript::load(&path).unwrap()));
        assert_eq!(replay.complete(&req).unwrap(), "one");
        assert_eq!(replay.complete(&req).unwrap(), "two");
        match replay.complete(&ChatRequest::new(Stage::Codegen, "s", "edited")) {
            Err(LlmError::ReplayMiss { stage, .. }) => assert_eq!(stage, Stage::Codegen),
            other => panic!("expected a miss, got {other:?}"),
        }
        std::fs::remove_dir_all(dir).ok();
    }
}
