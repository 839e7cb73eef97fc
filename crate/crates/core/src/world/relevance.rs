use std::collections::BTreeSet;

use super::{ObjectInstance, Scene};

/// Result of [`relevant_entities`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Relevance {
    /// Sorted by id.
    pub entities: Vec<ObjectInstance>,
    pub warnings: Vec<String>,
}

impl Relevance {
    pub fn ids(&self) -> Vec<&str> {
        self.entities.iter().map(|o| o.id.as_str()).collect()
    }
}

/// Instances of the requested kinds plus every receptacle that transitively contains one.
pub fn relevant_entities(scene: &Scene, names: &[impl AsRef<str>]) -> Relevance {
    let mut ids: BTreeSet<&str> = BTreeSet::new();
    let mut warnings = Vec::new();
    for name in names {
        let name = name.as_ref();
        let mut matched = false;
        for o in scene.objects.values().filter(|o| o.kind == name) {
            matched = true;
            ids.insert(&o.id);
            ids.extend(scene.ancestors(&o.id));
        }
        if !matched {
            warnings.push(format!("no object of kind {name} in scene {}", scene.id));
        }
    }
    Relevance {
        entities: ids.into_iter().map(|id| scene.objects[id].clone()).collect(),
        warnings,
    }
}
