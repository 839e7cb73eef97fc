use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use taskweave_core::llm::{
    ChatBackend, ChatRequest, LiveBackend, LiveConfig, LlmError, MockBackend, MockEntry, MockScript, RecordingBackend,
    ReplayBackend, Stage, Transcript, TranscriptWriter,
};
use taskweave_core::prompts::{Template, Templates};

/// Serves one canned (status, body) per connection and counts requests.
fn serve(responses: Vec<(u16, String)>) -> (String, Arc<AtomicUsize>, thread::JoinHandle<Vec<String>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    let handle = thread::spawn(move || {
        let mut bodies = Vec::new();
        for (status, body) in responses {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some((k, v)) = line.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        len = v.trim().parse().unwrap();
                    }
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            bodies.push(String::from_utf8(buf).unwrap());
            counter.fetch_add(1, Ordering::SeqCst);
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
        bodies
    });
    (url, hits, handle)
}

fn config(endpoint: String) -> LiveConfig {
    LiveConfig {
        endpoint,
        timeout_secs: 5,
        backoff_ms: 1,
        ..LiveConfig::default()
    }
}

fn ok_body(content: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string()
}

#[test]
fn live_retries_transient_statuses() {
    let (url, hits, handle) = serve(vec![
        (503, "busy".into()),
        (429, "slow down".into()),
        (200, ok_body("hello")),
    ]);
    let backend = LiveBackend::with_key(config(url), "k");
    let reply = backend.complete(&ChatRequest::new(Stage::Codegen, "sys", "user")).unwrap();
    assert_eq!(reply, "hello");
    assert_eq!(hits.load(Ordering::SeqCst), 3);
    let bodies = handle.join().unwrap();
    let sent: serde_json::Value = serde_json::from_str(&bodies[2]).unwrap();
    assert_eq!(sent["messages"][0]["role"], "system");
    assert_eq!(sent["messages"][1]["content"], "user");
    assert_eq!(sent["temperature"], 0.0);
}

#[test]
fn live_gives_up_after_three_attempts() {
    let (url, hits, handle) = serve(vec![(500, "a".into()), (502, "b".into()), (503, "c".into())]);
    let backend = LiveBackend::with_key(config(url), "k");
    let err = backend.complete(&ChatRequest::new(Stage::Codegen, "sys", "user")).unwrap_err();
    assert_eq!(
        err,
        LlmError::Http {
            status: 503,
            body: "c".into()
        }
    );
    handle.join().unwrap();
    assert_eq!(hits.load(Ordering::SeqCst), 3);
}

#[test]
fn live_does_not_retry_client_errors() {
    let (url, hits, handle) = serve(vec![(401, "no".into())]);
    let backend = LiveBackend::with_key(config(url), "k");
    let err = backend.complete(&ChatRequest::new(Stage::Codegen, "sys", "user")).unwrap_err();
    assert!(matches!(err, LlmError::Http { status: 401, .. }));
    handle.join().unwrap();
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[test]
fn empty_messages_are_rejected_before_any_call() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/", listener.local_addr().unwrap());
    listener.set_nonblocking(true).unwrap();
    let backend = LiveBackend::with_key(config(url), "k");
    let mut req = ChatRequest::new(Stage::Codegen, "sys", "user");
    req.messages.clear();
    assert!(matches!(backend.complete(&req), Err(LlmError::InvalidRequest(_))));
    assert!(listener.accept().is_err());
}

#[test]
fn missing_credential_is_reported() {
    let cfg = LiveConfig {
        api_key_env: "TASKWEAVE_TEST_UNSET_KEY".into(),
        ..LiveConfig::default()
    };
    assert_eq!(
        LiveBackend::from_env(cfg).unwrap_err(),
        LlmError::MissingCredential("TASKWEAVE_TEST_UNSET_KEY".into())
    );
}

#[test]
fn hash_ignores_cosmetic_whitespace() {
    let a = ChatRequest::new(Stage::Refine, "sys", "line one\nline   two\n");
    let b = ChatRequest::new(Stage::Refine, "sys ", "line one\n\n line two");
    assert_eq!(a.hash(), b.hash());
    let c = ChatRequest::new(Stage::Revise, "sys", "line one\nline two");
    assert_ne!(a.hash(), c.hash());
}

fn request(templates: &Templates) -> ChatRequest {
    let user = templates
        .decompose
        .render(&[
            ("instruction", "put the egg in the pan"),
            ("environment", "Objects: Egg\n"),
            ("room", "kitchen"),
            ("draft", ""),
        ])
        .unwrap();
    ChatRequest::new(Stage::Decompose1, templates.system.text(), user)
}

#[test]
fn edited_template_misses_the_transcript() {
    let path = std::env::temp_dir().join(format!("taskweave-llm-{}.jsonl", std::process::id()));
    let mock = MockBackend::new(MockScript {
        entries: vec![MockEntry {
            stage: Stage::Decompose1,
            reply: "Task Description: x\nSubtasks:\n1. y".into(),
        }],
        fault_plan: None,
    });
    let templates = Templates::bundled();
    let rec = RecordingBackend::new(mock, Arc::new(TranscriptWriter::create(&path).unwrap()));
    let reply = rec.complete(&request(&templates)).unwrap();

    let transcript = Arc::new(Transcript::load(&path).unwrap());
    assert_eq!(transcript.len(), 1);
    assert_eq!(ReplayBackend::new(transcript.clone()).complete(&request(&templates)).unwrap(), reply);

    let mut edited = templates.clone();
    edited.decompose = Template::new("decompose", format!("{}\nBe brief.", templates.decompose.text()));
    let err = ReplayBackend::new(transcript).complete(&request(&edited)).unwrap_err();
    assert!(matches!(err, LlmError::ReplayMiss { stage: Stage::Decompose1, .. }));
    assert!(err.to_string().contains("decompose1"));
    std::fs::remove_file(path).ok();
}

#[test]
fn sessions_sharing_a_transcript_stay_apart() {
    let path = std::env::temp_dir().join(format!("taskweave-llm-sessions-{}.jsonl", std::process::id()));
    let writer = Arc::new(TranscriptWriter::create(&path).unwrap());
    let req = ChatRequest::new(Stage::Codegen, "s", "same prompt");
    for (key, reply) in [("a", "first"), ("b", "second")] {
        let mock = MockBackend::new(MockScript {
            entries: vec![MockEntry {
                stage: Stage::Codegen,
                reply: reply.into(),
            }],
            fault_plan: None,
        });
        RecordingBackend::new(mock, writer.clone()).with_session(key).complete(&req).unwrap();
    }
    let t = Arc::new(Transcript::load(&path).unwrap());
    assert_eq!(ReplayBackend::new(t.clone()).with_session("b").complete(&req).unwrap(), "second");
    assert_eq!(ReplayBackend::new(t.clone()).with_session("a").complete(&req).unwrap(), "first");
    assert!(ReplayBackend::new(t).complete(&req).is_err());
    std::fs::remove_file(path).ok();
}
