use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AgentId, AgentState, Capabilities, FloorplanType, ObjectInstance, ObjectState, Scene, StateFlag};

pub const SCENE_VERSION: u32 = 1;

/// On-disk scene format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SceneDocument {
    pub version: u32,
    pub id: String,
    pub floorplan_type: FloorplanType,
    pub objects: Vec<ObjectDocument>,
    pub agents: Vec<AgentId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ObjectDocument {
    pub id: String,
    pub kind: String,
    #[serde(default)]
    pub properties: Capabilities,
    #[serde(default)]
    pub state: ObjectState,
    #[serde(default)]
    pub parent_receptacle: Option<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SceneLoadError {
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("{path}: dangling reference to {target}")]
    DanglingReference { path: String, target: String },
    #[error("{path}: cyclic containment through {id}")]
    CyclicContainment { path: String, id: String },
    #[error("{path}: {message}")]
    Invariant { path: String, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

impl SceneLoadError {
    /// JSON pointer of the offending value.
    pub fn pointer(&self) -> &str {
        match self {
            SceneLoadError::Schema { path, .. }
            | SceneLoadError::DanglingReference { path, .. }
            | SceneLoadError::CyclicContainment { path, .. }
            | SceneLoadError::Invariant { path, .. }
            | SceneLoadError::Io { path, .. } => path,
        }
    }
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } | Segment::Enum { variant: key } => {
                out.push_str(&key.replace('~', "~0").replace('/', "~1"))
            }
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

/// Parses and validates a scene document from JSON text.
pub fn parse_scene(text: &str) -> Result<Scene, SceneLoadError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: SceneDocument = serde_path_to_error::deserialize(de).map_err(|e| SceneLoadError::Schema {
        path: pointer_of(e.path()),
        message: e.inner().to_string(),
    })?;
    load_scene(doc)
}

pub fn load_scene_file(path: impl AsRef<Path>) -> Result<Scene, SceneLoadError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| SceneLoadError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_scene(&text)
}

/// Checks a document against the scene invariants and builds the [`Scene`].
pub fn load_scene(doc: SceneDocument) -> Result<Scene, SceneLoadError> {
    let invariant = |path: String, message: String| Err(SceneLoadError::Invariant { path, message });
    if doc.version != SCENE_VERSION {
        return invariant(
            "/version".into(),
            format!("unsupported version {}, expected {SCENE_VERSION}", doc.version),
        );
    }
    if doc.agents.is_empty() {
        return invariant("/agents".into(), "at least one agent is required".into());
    }
    let mut agents = BTreeMap::new();
    for (i, a) in doc.agents.iter().enumerate() {
        if agents.insert(*a, AgentState::new(*a)).is_some() {
            return invariant(format!("/agents/{i}"), format!("duplicate agent {a}"));
        }
    }

    let mut index = BTreeMap::new();
    for (i, o) in doc.objects.iter().enumerate() {
        if o.id.is_empty() {
            return invariant(format!("/objects/{i}/id"), "empty object id".into());
        }
        if index.insert(o.id.as_str(), i).is_some() {
            return invariant(format!("/objects/{i}/id"), format!("duplicate object id {}", o.id));
        }
        for flag in StateFlag::ALL {
            if o.state.get(flag) && !flag.required_capability(&o.properties) {
                return invariant(
                    format!("/objects/{i}/state/{}", flag.name()),
                    format!("{} has {} without the matching capability", o.id, flag.name()),
                );
            }
        }
    }
    for (i, o) in doc.objects.iter().enumerate() {
        let Some(p) = &o.parent_receptacle else { continue };
        let path = format!("/objects/{i}/parentReceptacle");
        let Some(&pi) = index.get(p.as_str()) else {
            return Err(SceneLoadError::DanglingReference { path, target: p.clone() });
        };
        if !doc.objects[pi].properties.receptacle {
            return invariant(path, format!("{p} is not a receptacle"));
        }
    }
    for (i, o) in doc.objects.iter().enumerate() {
        let mut seen = BTreeSet::new();
        let mut cur = o.parent_receptacle.as_deref();
        while let Some(p) = cur {
            if p == o.id || !seen.insert(p) {
                return Err(SceneLoadError::CyclicContainment {
                    path: format!("/objects/{i}/parentReceptacle"),
                    id: o.id.clone(),
                });
            }
            cur = doc.objects[index[p]].parent_receptacle.as_deref();
        }
    }

    let objects = doc
        .objects
        .into_iter()
        .map(|o| {
            let inst = ObjectInstance {
                id: o.id.clone(),
                kind: o.kind,
                properties: o.properties,
                state: o.state,
                parent_receptacle: o.parent_receptacle,
                held_by: None,
            };
            (o.id, inst)
        })
        .collect();
    Ok(Scene {
        id: doc.id,
        floorplan_type: doc.floorplan_type,
        objects,
        agents,
        consumed_this_skill: BTreeSet::new(),
    })
}

impl SceneDocument {
    /// The document form of a scene at rest. Held objects are written without a parent.
    pub fn from_scene(scene: &Scene) -> SceneDocument {
        SceneDocument {
            version: SCENE_VERSION,
            id: scene.id.clone(),
            floorplan_type: scene.floorplan_type,
            objects: scene
                .objects
                .values()
                .map(|o| ObjectDocument {
                    id: o.id.clone(),
                    kind: o.kind.clone(),
                    properties: o.properties,
                    state: o.state,
                    parent_receptacle: o.parent_receptacle.clone(),
                })
                .collect(),
            agents: scene.agents.keys().copied().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
      "version": 1, "id": "t", "floorplanType": "Kitchen",
      "objects": [
        {"id": "Fridge_1", "kind": "Fridge", "properties": {"openable": true, "receptacle": true}, "state": {}, "parentReceptacle": null},
        {"id": "Egg_1", "kind": "Egg", "properties": {"pickupable": true}, "state": {}, "parentReceptacle": "Fridge_1"}
      ],
      "agents": ["human", "robot"]
    }"#;

    #[test]
    fn loads_a_minimal_document() {
        let scene = parse_scene(BASE).unwrap();
        assert_eq!(scene.floorplan_type, FloorplanType::Kitchen);
        assert_eq!(scene.objects["Egg_1"].parent_receptacle.as_deref(), Some("Fridge_1"));
        scene.check_invariants().unwrap();
    }

    #[test]
    fn dangling_reference_has_a_pointer() {
        let text = BASE.replace("\"parentReceptacle\": \"Fridge_1\"", "\"parentReceptacle\": \"Nonexistent_9\"");
        let err = parse_scene(&text).unwrap_err();
        assert!(matches!(err, SceneLoadError::DanglingReference { .. }));
        assert_eq!(err.pointer(), "/objects/1/parentReceptacle");
    }

    #[test]
    fn cycle_is_rejected() {
        let text = r#"{"version": 1, "id": "c", "floorplanType": "Bedroom", "agents": ["robot"],
          "objects": [
            {"id": "A_1", "kind": "Box", "properties": {"receptacle": true}, "parentReceptacle": "B_1"},
            {"id": "B_1", "kind": "Box", "properties": {"receptacle": true}, "parentReceptacle": "A_1"}
          ]}"#;
        assert!(matches!(parse_scene(text).unwrap_err(), SceneLoadError::CyclicContainment { .. }));
    }

    #[test]
    fn schema_errors_report_paths() {
        let text = BASE.replace("\"openable\": true", "\"openable\": 3");
        let err = parse_scene(&text).unwrap_err();
        assert_eq!(err.pointer(), "/objects/0/properties/openable");
        let text = BASE.replace("\"pickupable\": true", "\"flying\": true");
        assert!(parse_scene(&text).unwrap_err().pointer().starts_with("/objects/1/properties"));
    }

    #[test]
    fn state_without_capability_is_rejected() {
        let text = BASE.replace("\"state\": {}, \"parentReceptacle\": \"Fridge_1\"", "\"state\": {\"isOpen\": true}, \"parentReceptacle\": \"Fridge_1\"");
        assert_eq!(parse_scene(&text).unwrap_err().pointer(), "/objects/1/state/isOpen");
    }

    #[test]
    fn document_round_trip() {
        let scene = parse_scene(BASE).unwrap();
        let again = load_scene(SceneDocument::from_scene(&scene)).unwrap();
        assert_eq!(scene, again);
    }
}
