//! Data shipped with the crate: scenes, the skill table, default profiles and the task suite.

use crate::world::{parse_scene, Scene, SceneLoadError};

pub const SKILLS_JSON: &str = include_str!("../data/skills.json");
pub const PROFILES_JSON: &str = include_str!("../data/profiles.json");
pub const SUITE_JSON: &str = include_str!("../data/suite.json");

const SCENES: &[(&str, &str)] = &[
    ("bathroom_1", include_str!("../data/scenes/bathroom_1.json")),
    ("bathroom_2", include_str!("../data/scenes/bathroom_2.json")),
    ("bathroom_3", include_str!("../data/scenes/bathroom_3.json")),
    ("bathroom_4", include_str!("../data/scenes/bathroom_4.json")),
    ("bathroom_5", include_str!("../data/scenes/bathroom_5.json")),
    ("bedroom_1", include_str!("../data/scenes/bedroom_1.json")),
    ("bedroom_2", include_str!("../data/scenes/bedroom_2.json")),
    ("bedroom_3", include_str!("../data/scenes/bedroom_3.json")),
    ("bedroom_4", include_str!("../data/scenes/bedroom_4.json")),
    ("bedroom_5", include_str!("../data/scenes/bedroom_5.json")),
    ("kitchen_1", include_str!("../data/scenes/kitchen_1.json")),
    ("kitchen_2", include_str!("../data/scenes/kitchen_2.json")),
    ("kitchen_3", include_str!("../data/scenes/kitchen_3.json")),
    ("kitchen_4", include_str!("../data/scenes/kitchen_4.json")),
    ("kitchen_5", include_str!("../data/scenes/kitchen_5.json")),
    ("living_room_1", include_str!("../data/scenes/living_room_1.json")),
    ("living_room_2", include_str!("../data/scenes/living_room_2.json")),
    ("living_room_3", include_str!("../data/scenes/living_room_3.json")),
    ("living_room_4", include_str!("../data/scenes/living_room_4.json")),
    ("living_room_5", include_str!("../data/scenes/living_room_5.json")),
    ("mini_clean", include_str!("../data/scenes/mini_clean.json")),
    ("mini_fridge", include_str!("../data/scenes/mini_fridge.json")),
    ("mini_slice", include_str!("../data/scenes/mini_slice.json")),
];

/// Ids of all bundled scenes, sorted.
pub fn scene_ids() -> impl Iterator<Item = &'static str> {
    SCENES.iter().map(|(id, _)| *id)
}

pub fn scene_text(id: &str) -> Option<&'static str> {
    SCENES.iter().find(|(sid, _)| *sid == id).map(|(_, text)| *text)
}

/// Loads a bundled scene by id. `None` when the id is unknown.
pub fn scene(id: &str) -> Option<Result<Scene, SceneLoadError>> {
    scene_text(id).map(parse_scene)
}
