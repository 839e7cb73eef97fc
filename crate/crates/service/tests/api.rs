use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use taskweave_core::pipeline::FixedClock;
use taskweave_service::{router, AppState, ServiceConfig};
use tower::ServiceExt;

const DECOMPOSED: &str = "Task Description: put the egg in the pan\nSubtasks:\n1. Open the fridge\n2. Put the egg in the pan\n3. Close the fridge\n";
const EGG_PLAN: &str = "```\nOpenObject(Fridge_1)\nPutObjectInReceptacle(Egg_1, Pan_1)\nCloseObject(Fridge_1)\n```\n";
const TOMATO_PLAN: &str = "```\nOpenObject(Fridge_1)\nPutObjectInReceptacle(Tomato_1, Pan_1)\nCloseObject(Fridge_1)\n```\n";

fn mock() -> Value {
    json!({ "entries": [
        { "stage": "decompose1", "reply": DECOMPOSED },
        { "stage": "decompose2", "reply": DECOMPOSED },
        { "stage": "codegen", "reply": EGG_PLAN },
        { "stage": "revise", "reply": TOMATO_PLAN },
    ]})
}

fn create_body() -> Value {
    json!({ "sceneId": "kitchen_1", "task": "Put the egg in the pan.", "mock": mock() })
}

fn app_with(config: ServiceConfig) -> Router {
    router(AppState::new(config).unwrap())
}

fn config() -> ServiceConfig {
    ServiceConfig {
        clock: Arc::new(FixedClock::default()),
        ..ServiceConfig::default()
    }
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value)
}

async fn create(app: &Router, body: Value) -> String {
    let (status, v) = call(app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["sessionId"].as_str().unwrap().to_string()
}

async fn wait_for(app: &Router, id: &str, phase: &str, turn: u64) -> Value {
    for _ in 0..500 {
        let (status, snap) = call(app, "GET", &format!("/sessions/{id}"), None).await;
        assert_eq!(status, StatusCode::OK);
        if snap["phase"] == phase && snap["turn"] == turn {
            return snap;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    panic!("session {id} never reached {phase} at turn {turn}");
}

async fn sse(app: &Router, uri: &str, last_event_id: Option<&str>) -> Vec<Value> {
    let mut req = Request::builder().uri(uri);
    if let Some(id) = last_event_id {
        req = req.header("last-event-id", id);
    }
    let res = app.clone().oneshot(req.body(Body::empty()).unwrap()).await.unwrap();
    assert_eq!(res.status(), StatusCode::OK);
    let bytes = tokio::time::timeout(Duration::from_secs(10), res.into_body().collect())
        .await
        .expect("stream ends after the terminal event")
        .unwrap()
        .to_bytes();
    String::from_utf8(bytes.to_vec())
        .unwrap()
        .lines()
        .filter_map(|l| l.strip_prefix("data: "))
        .map(|d| serde_json::from_str(d).unwrap())
        .collect()
}

async fn feedback(app: &Router, id: &str, body: Value) -> (StatusCode, Value) {
    call(app, "POST", &format!("/sessions/{id}/feedback"), Some(body)).await
}

#[tokio::test]
async fn health_and_scenes() {
    let app = app_with(config());
    let (status, v) = call(&app, "GET", "/healthz", None).await;
    assert_eq!((status, v["status"].as_str()), (StatusCode::OK, Some("ok")));
    let (_, scenes) = call(&app, "GET", "/scenes", None).await;
    assert!(scenes.as_array().unwrap().contains(&json!("kitchen_1")));
    let (status, scene) = call(&app, "GET", "/scenes/kitchen_1", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(scene["objects"]["Fridge_1"].is_object());
    let (status, err) = call(&app, "GET", "/scenes/attic", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(err["error"].is_string());
}

#[tokio::test]
async fn bad_creates_are_rejected() {
    let app = app_with(config());
    let (status, _) = call(&app, "POST", "/sessions", Some(json!({ "sceneId": "attic", "task": "x", "mock": mock() }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "POST", "/sessions", Some(json!({ "sceneId": "kitchen_1" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "POST", "/sessions", Some(json!({ "sceneId": "kitchen_1", "task": "  ", "mock": mock() }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, err) = call(&app, "POST", "/sessions", Some(json!({ "sceneId": "kitchen_1", "task": "juggle" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(err["error"].as_str().unwrap().contains("mock"));
    let (status, _) = call(&app, "POST", "/sessions", Some(json!({ "sceneId": "kitchen_1", "task": "x", "backend": "replay" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "GET", "/sessions/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = feedback(&app, "nope", json!({ "decision": "approve" })).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn suite_entries_supply_the_mock_script() {
    let app = app_with(config());
    let suite = taskweave_core::harness::TaskSuite::bundled();
    let e = &suite.entries[0];
    let id = create(&app, json!({ "sceneId": e.scene_id, "task": e.instruction })).await;
    let snap = wait_for(&app, &id, "AwaitFeedback", 0).await;
    assert!(snap["planText"].is_string());
}

#[tokio::test]
async fn a_revision_reaches_the_next_prompt_and_turns_are_answered_once() {
    let app = app_with(config());
    let id = create(&app, create_body()).await;
    let snap = wait_for(&app, &id, "AwaitFeedback", 0).await;
    assert!(snap["planText"].as_str().unwrap().contains("Egg_1"));

    let (status, _) = feedback(&app, &id, json!({ "decision": "revise", "text": "  " })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = feedback(&app, &id, json!({ "decision": "shrug" })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let revise = json!({ "decision": "revise", "text": "use tomato not apple", "turn": 0 });
    let (status, _) = feedback(&app, &id, revise.clone()).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let (status, err) = feedback(&app, &id, revise).await;
    assert_eq!(status, StatusCode::CONFLICT, "{err}");

    let snap = wait_for(&app, &id, "AwaitFeedback", 1).await;
    assert!(snap["planText"].as_str().unwrap().contains("Tomato_1"));
    assert_eq!(snap["feedbackRounds"], 1);

    let (status, _) = feedback(&app, &id, json!({ "decision": "approve", "turn": 1 })).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let snap = wait_for(&app, &id, "Done", 2).await;
    assert_eq!(snap["approved"], true);
    assert_eq!(snap["executed"], true);
    assert_eq!(snap["allocation"]["success"], true);

    let (status, _) = feedback(&app, &id, json!({ "decision": "approve" })).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let frames = sse(&app, &format!("/sessions/{id}/events"), None).await;
    assert_eq!(frames.len() as u64, snap["events"].as_u64().unwrap());
    for (i, f) in frames.iter().enumerate() {
        assert_eq!(f["seq"], i as u64);
    }
    assert_eq!(frames.last().unwrap()["event"], "done");
    let revise_prompt = frames
        .iter()
        .find(|f| f["event"] == "prompt" && f["payload"]["stage"] == "revise")
        .unwrap();
    assert!(revise_prompt["payload"]["user"].as_str().unwrap().contains("use tomato not apple"));
}

#[tokio::test]
async fn event_streams_resume_and_follow_live_sessions() {
    let app = app_with(config());
    let id = create(&app, create_body()).await;
    wait_for(&app, &id, "AwaitFeedback", 0).await;

    let follower = {
        let app = app.clone();
        let id = id.clone();
        tokio::spawn(async move { sse(&app, &format!("/sessions/{id}/events"), None).await })
    };
    tokio::time::sleep(Duration::from_millis(50)).await;
    feedback(&app, &id, json!({ "decision": "approve" })).await;
    let all = follower.await.unwrap();
    assert_eq!(all.last().unwrap()["event"], "done");

    let resumed = sse(&app, &format!("/sessions/{id}/events"), Some("3")).await;
    assert_eq!(resumed.first().unwrap()["seq"], 4);
    assert_eq!(resumed, all[4..]);
    let from = sse(&app, &format!("/sessions/{id}/events?from=2"), None).await;
    assert_eq!(from, all[2..]);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn parallel_creates_get_distinct_sessions() {
    let app = app_with(config());
    let handles: Vec<_> = (0..8)
        .map(|_| {
            let app = app.clone();
            tokio::spawn(async move { create(&app, create_body()).await })
        })
        .collect();
    let mut ids = Vec::new();
    for h in handles {
        ids.push(h.await.unwrap());
    }
    let mut unique = ids.clone();
    unique.sort();
    unique.dedup();
    assert_eq!(unique.len(), 8);
    for id in &ids {
        let snap = wait_for(&app, id, "AwaitFeedback", 0).await;
        assert_eq!(snap["id"], id.as_str());
    }
    let (_, list) = call(&app, "GET", "/sessions", None).await;
    assert_eq!(list.as_array().unwrap().len(), 8);
}

#[tokio::test]
async fn creation_is_refused_at_capacity() {
    let app = app_with(ServiceConfig {
        max_sessions: 1,
        ..config()
    });
    let id = create(&app, create_body()).await;
    wait_for(&app, &id, "AwaitFeedback", 0).await;
    let (status, _) = call(&app, "POST", "/sessions", Some(create_body())).await;
    assert_eq!(status, StatusCode::CONFLICT);
    feedback(&app, &id, json!({ "decision": "approve" })).await;
    wait_for(&app, &id, "Done", 1).await;
    create(&app, create_body()).await;
}

#[tokio::test]
async fn persisted_sessions_come_back_read_only() {
    let dir = tempfile::tempdir().unwrap();
    let persisted = || ServiceConfig {
        persist_dir: Some(dir.path().to_path_buf()),
        ..config()
    };
    let app = app_with(persisted());
    let id = create(&app, create_body()).await;
    wait_for(&app, &id, "AwaitFeedback", 0).await;
    feedback(&app, &id, json!({ "decision": "approve" })).await;
    let before = wait_for(&app, &id, "Done", 1).await;
    let frames = sse(&app, &format!("/sessions/{id}/events"), None).await;
    drop(app);

    let app = app_with(persisted());
    let (status, after) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(after["readOnly"], true);
    for key in ["phase", "instruction", "sceneId", "planText", "approved", "executed", "events", "turn"] {
        assert_eq!(after[key], before[key], "{key}");
    }
    assert_eq!(sse(&app, &format!("/sessions/{id}/events"), None).await, frames);
    let (status, _) = feedback(&app, &id, json!({ "decision": "approve" })).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let fresh = create(&app, create_body()).await;
    assert_ne!(fresh, id);
}
