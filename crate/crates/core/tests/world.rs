mod common;

use common::{all_actions, enumerate_states, oracle_apply};
use taskweave_core::fixtures;
use taskweave_core::par::{self, Parallelism};
use taskweave_core::world::{
    apply_action, parse_scene, relevant_entities, ActionKind, AgentId, AtomicAction, Capabilities,
    ErrorKind, FloorplanType, ObjectInstance, Scene, SceneLoadError,
};

fn scene(id: &str) -> Scene {
    fixtures::scene(id).unwrap().unwrap()
}

/// (states, checks, disagreements)
fn compare_with_oracle(id: &str) -> (usize, usize, Vec<String>) {
    let base = scene(id);
    let states = enumerate_states(&base);
    let actions = all_actions(&base);
    let results = par::map(Parallelism::Parallel, &states, |s| {
        let mut bad = Vec::new();
        for agent in AgentId::ALL {
            for a in &actions {
                let got = apply_action(s, agent, a).ok();
                let want = oracle_apply(s, agent, a);
                if got != want && bad.len() < 3 {
                    bad.push(format!("{agent} {a} ok={} want={}", got.is_some(), want.is_some()));
                }
            }
        }
        bad
    });
    let checks = states.len() * actions.len() * 2;
    (states.len(), checks, results.into_iter().flatten().collect())
}

#[test]
fn apply_action_agrees_with_brute_force_oracle() {
    for id in ["mini_fridge", "mini_slice", "mini_clean"] {
        let (states, checks, bad) = compare_with_oracle(id);
        assert!(states > 10 && checks > 1000, "{id}: {states} states");
        assert!(bad.is_empty(), "{id}: {bad:?}");
    }
}

#[test]
fn pickup_from_closed_fridge_enumerated() {
    let base = scene("mini_fridge");
    for open in [false, true] {
        for holding in [None, Some("Knife_1")] {
            let mut s = base.clone();
            s.objects.get_mut("Fridge_1").unwrap().state.is_open = open;
            let robot = s.agents.get_mut(&AgentId::Robot).unwrap();
            robot.location = Some("Egg_1".into());
            if let Some(h) = holding {
                robot.holding = Some(h.into());
                let k = s.objects.get_mut(h).unwrap();
                k.parent_receptacle = None;
                k.held_by = Some(AgentId::Robot);
            }
            let r = apply_action(&s, AgentId::Robot, &AtomicAction::PickUpObject("Egg_1".into()));
            match (open, holding) {
                (false, _) => assert_eq!(r.unwrap_err().kind, ErrorKind::ReceptacleClosed),
                (true, Some(_)) => assert_eq!(r.unwrap_err().kind, ErrorKind::HandOccupied),
                (true, None) => assert_eq!(r.unwrap().objects["Egg_1"].held_by, Some(AgentId::Robot)),
            }
        }
    }
}

#[test]
fn capability_gating() {
    let cases: &[(ActionKind, &[&str])] = &[
        (ActionKind::OpenObject, &["X_1"]),
        (ActionKind::CloseObject, &["X_1"]),
        (ActionKind::BreakObject, &["X_1"]),
        (ActionKind::SwitchOn, &["X_1"]),
        (ActionKind::SwitchOff, &["X_1"]),
        (ActionKind::PickUpObject, &["X_1"]),
        (ActionKind::UseUpObject, &["X_1"]),
    ];
    let s = Scene::new("cap", FloorplanType::Kitchen).with_object(ObjectInstance::new("X_1", "X", Capabilities::default()));
    let mut s = s;
    s.agents.get_mut(&AgentId::Robot).unwrap().location = Some("X_1".into());
    for (kind, ids) in cases {
        let ids: Vec<String> = ids.iter().map(|s| s.to_string()).collect();
        let a = AtomicAction::from_parts(*kind, &ids).unwrap();
        assert_eq!(apply_action(&s, AgentId::Robot, &a).unwrap_err().kind, ErrorKind::MissingCapability, "{a}");
    }
}

#[test]
fn idempotence_violations_fail() {
    let mut s = scene("mini_fridge");
    s.agents.get_mut(&AgentId::Robot).unwrap().location = Some("Fridge_1".into());
    let s = apply_action(&s, AgentId::Robot, &AtomicAction::OpenObject("Fridge_1".into())).unwrap();
    let e = apply_action(&s, AgentId::Robot, &AtomicAction::OpenObject("Fridge_1".into())).unwrap_err();
    assert_eq!(e.kind, ErrorKind::PreconditionFailed);
}

#[test]
fn goto_only_moves_the_agent() {
    let s = scene("kitchen_1");
    let next = apply_action(&s, AgentId::Robot, &AtomicAction::GoToObject("Fridge_1".into())).unwrap();
    assert_eq!(next.agents[&AgentId::Robot].location.as_deref(), Some("Fridge_1"));
    assert_eq!(next.objects, s.objects);
}

#[test]
fn unknown_object() {
    let s = scene("kitchen_1");
    let e = apply_action(&s, AgentId::Robot, &AtomicAction::GoToObject("Unicorn_1".into())).unwrap_err();
    assert_eq!(e.kind, ErrorKind::UnknownObject);
}

#[test]
fn bundled_scenes_load_with_expected_types() {
    assert_eq!(scene("kitchen_1").floorplan_type, FloorplanType::Kitchen);
    assert_eq!(scene("bathroom_3").floorplan_type, FloorplanType::Bathroom);
    let ids: Vec<&str> = fixtures::scene_ids().collect();
    for prefix in ["kitchen_", "living_room_", "bedroom_", "bathroom_"] {
        assert_eq!(ids.iter().filter(|i| i.starts_with(prefix)).count(), 5, "{prefix}");
    }
}

#[test]
fn loader_reports_reference_errors() {
    let dangling = r#"{"version":1,"id":"d","floorplanType":"Kitchen","agents":["robot"],
        "objects":[{"id":"Egg_1","kind":"Egg","properties":{},"state":{},"parentReceptacle":"Nonexistent_9"}]}"#;
    let e = parse_scene(dangling).unwrap_err();
    assert!(matches!(e, SceneLoadError::DanglingReference { .. }), "{e}");
    assert_eq!(e.pointer(), "/objects/0/parentReceptacle");

    let cyclic = r#"{"version":1,"id":"c","floorplanType":"Kitchen","agents":["robot"],
        "objects":[{"id":"A_1","kind":"A","properties":{"receptacle":true},"state":{},"parentReceptacle":"B_1"},
                   {"id":"B_1","kind":"B","properties":{"receptacle":true},"state":{},"parentReceptacle":"A_1"}]}"#;
    let e = parse_scene(cyclic).unwrap_err();
    assert!(matches!(e, SceneLoadError::CyclicContainment { .. }), "{e}");
}

#[test]
fn relevance_on_kitchen_fixture() {
    let s = scene("kitchen_1");
    assert_eq!(s.objects["Apple_1"].parent_receptacle.as_deref(), Some("Fridge_1"));
    let r = relevant_entities(&s, &["Apple"]);
    assert_eq!(r.ids(), vec!["Apple_1", "Fridge_1"]);
    assert!(relevant_entities(&s, &[] as &[&str]).entities.is_empty());
    let r = relevant_entities(&s, &["Unicorn"]);
    assert!(r.entities.is_empty());
    assert_eq!(r.warnings.len(), 1);
}
