//! Household scene state and the atomic-action state machine.
//!
//! A [`Scene`] is a plain value. [`apply_action`] maps an old scene to a new
//! one or reports the first violated precondition, leaving the input intact.

mod action;
mod apply;
mod document;
mod error;
mod relevance;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use action::{ActionKind, AtomicAction};
pub use apply::apply_action;
pub use document::{load_scene, load_scene_file, parse_scene, SceneDocument, SceneLoadError};
pub use error::{ActionError, ErrorKind, ExecutionError};
pub use relevance::{relevant_entities, Relevance};

/// The two collaborators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentId {
    Human,
    Robot,
}

impl AgentId {
    pub const ALL: [AgentId; 2] = [AgentId::Human, AgentId::Robot];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentId::Human => "human",
            AgentId::Robot => "robot",
        }
    }

    pub fn parse(s: &str) -> Option<AgentId> {
        match s {
            "human" => Some(AgentId::Human),
            "robot" => Some(AgentId::Robot),
            _ => None,
        }
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FloorplanType {
    Kitchen,
    LivingRoom,
    Bedroom,
    Bathroom,
}

impl FloorplanType {
    pub const ALL: [FloorplanType; 4] = [
        FloorplanType::Kitchen,
        FloorplanType::LivingRoom,
        FloorplanType::Bedroom,
        FloorplanType::Bathroom,
    ];

    /// Human-readable room name used in prompts.
    pub fn room_name(self) -> &'static str {
        match self {
            FloorplanType::Kitchen => "kitchen",
            FloorplanType::LivingRoom => "living room",
            FloorplanType::Bedroom => "bedroom",
            FloorplanType::Bathroom => "bathroom",
        }
    }
}

/// Capability names, in the order they are listed in prompts.
pub const CAPABILITY_NAMES: [&str; 11] = [
    "openable",
    "toggleable",
    "breakable",
    "sliceable",
    "pickupable",
    "receptacle",
    "canBeUsedUp",
    "dirtyable",
    "sharp",
    "cleaningTool",
    "detergent",
];

/// Static capability flags of an object.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
pub struct Capabilities {
    pub openable: bool,
    pub toggleable: bool,
    pub breakable: bool,
    pub sliceable: bool,
    pub pickupable: bool,
    pub receptacle: bool,
    pub can_be_used_up: bool,
    pub dirtyable: bool,
    pub sharp: bool,
    pub cleaning_tool: bool,
    pub detergent: bool,
}

impl Capabilities {
    pub fn flags(&self) -> [(&'static str, bool); 11] {
        [
            ("openable", self.openable),
            ("toggleable", self.toggleable),
            ("breakable", self.breakable),
            ("sliceable", self.sliceable),
            ("pickupable", self.pickupable),
            ("receptacle", self.receptacle),
            ("canBeUsedUp", self.can_be_used_up),
            ("dirtyable", self.dirtyable),
            ("sharp", self.sharp),
            ("cleaningTool", self.cleaning_tool),
            ("detergent", self.detergent),
        ]
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.flags()
            .into_iter()
            .filter_map(|(n, on)| on.then_some(n))
            .collect()
    }
}

/// Mutable boolean state of an object.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
pub struct ObjectState {
    pub is_open: bool,
    pub is_toggled: bool,
    pub is_broken: bool,
    pub is_sliced: bool,
    pub is_used_up: bool,
    pub is_dirty: bool,
}

/// One state flag, as referenced by goal predicates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateFlag {
    #[serde(rename = "isOpen")]
    Open,
    #[serde(rename = "isToggled")]
    Toggled,
    #[serde(rename = "isBroken")]
    Broken,
    #[serde(rename = "isSliced")]
    Sliced,
    #[serde(rename = "isUsedUp")]
    UsedUp,
    #[serde(rename = "isDirty")]
    Dirty,
}

impl StateFlag {
    pub const ALL: [StateFlag; 6] = [
        StateFlag::Open,
        StateFlag::Toggled,
        StateFlag::Broken,
        StateFlag::Sliced,
        StateFlag::UsedUp,
        StateFlag::Dirty,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StateFlag::Open => "isOpen",
            StateFlag::Toggled => "isToggled",
            StateFlag::Broken => "isBroken",
            StateFlag::Sliced => "isSliced",
            StateFlag::UsedUp => "isUsedUp",
            StateFlag::Dirty => "isDirty",
        }
    }

    /// The capability that must be present for this flag to be set.
    pub fn required_capability(self, caps: &Capabilities) -> bool {
        match self {
            StateFlag::Open => caps.openable,
            StateFlag::Toggled => caps.toggleable,
            StateFlag::Broken => caps.breakable,
            StateFlag::Sliced => caps.sliceable,
            StateFlag::UsedUp => caps.can_be_used_up,
            StateFlag::Dirty => caps.dirtyable,
        }
    }
}

impl ObjectState {
    pub fn get(&self, flag: StateFlag) -> bool {
        match flag {
            StateFlag::Open => self.is_open,
            StateFlag::Toggled => self.is_toggled,
            StateFlag::Broken => self.is_broken,
            StateFlag::Sliced => self.is_sliced,
            StateFlag::UsedUp => self.is_used_up,
            StateFlag::Dirty => self.is_dirty,
        }
    }

    pub fn set(&mut self, flag: StateFlag, value: bool) {
        match flag {
            StateFlag::Open => self.is_open = value,
            StateFlag::Toggled => self.is_toggled = value,
            StateFlag::Broken => self.is_broken = value,
            StateFlag::Sliced => self.is_sliced = value,
            StateFlag::UsedUp => self.is_used_up = value,
            StateFlag::Dirty => self.is_dirty = value,
        }
    }

    pub fn names(&self) -> Vec<&'static str> {
        StateFlag::ALL
            .into_iter()
            .filter(|f| self.get(*f))
            .map(StateFlag::name)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ObjectInstance {
    pub id: String,
    pub kind: String,
    pub properties: Capabilities,
    pub state: ObjectState,
    pub parent_receptacle: Option<String>,
    pub held_by: Option<AgentId>,
}

impl ObjectInstance {
    pub fn new(id: impl Into<String>, kind: impl Into<String>, properties: Capabilities) -> Self {
        ObjectInstance {
            id: id.into(),
            kind: kind.into(),
            properties,
            state: ObjectState::default(),
            parent_receptacle: None,
            held_by: None,
        }
    }

    pub fn inside(mut self, parent: impl Into<String>) -> Self {
        self.parent_receptacle = Some(parent.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentState {
    pub id: AgentId,
    pub location: Option<String>,
    pub holding: Option<String>,
}

impl AgentState {
    pub fn new(id: AgentId) -> Self {
        AgentState {
            id,
            location: None,
            holding: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Scene {
    pub id: String,
    pub floorplan_type: FloorplanType,
    pub objects: BTreeMap<String, ObjectInstance>,
    pub agents: BTreeMap<AgentId, AgentState>,
    /// Detergents consumed by `UseUpObject` in the skill currently executing.
    /// The executor clears this at every skill boundary.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub consumed_this_skill: BTreeSet<String>,
}

impl Scene {
    /// An empty scene with both agents present.
    pub fn new(id: impl Into<String>, floorplan_type: FloorplanType) -> Self {
        Scene {
            id: id.into(),
            floorplan_type,
            objects: BTreeMap::new(),
            agents: AgentId::ALL
                .into_iter()
                .map(|a| (a, AgentState::new(a)))
                .collect(),
            consumed_this_skill: BTreeSet::new(),
        }
    }

    pub fn with_object(mut self, object: ObjectInstance) -> Self {
        self.objects.insert(object.id.clone(), object);
        self
    }

    pub fn object(&self, id: &str) -> Option<&ObjectInstance> {
        self.objects.get(id)
    }

    pub fn agent(&self, id: AgentId) -> Option<&AgentState> {
        self.agents.get(&id)
    }

    /// Distinct object kinds, sorted.
    pub fn kinds(&self) -> BTreeSet<&str> {
        self.objects.values().map(|o| o.kind.as_str()).collect()
    }

    /// Ancestors of `id` from the direct parent outward. Stops on a cycle.
    pub fn ancestors(&self, id: &str) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        let mut cur = self.objects.get(id).and_then(|o| o.parent_receptacle.as_deref());
        while let Some(p) = cur {
            if p == id || out.contains(&p) {
                break;
            }
            out.push(p);
            cur = self.objects.get(p).and_then(|o| o.parent_receptacle.as_deref());
        }
        out
    }

    /// The outermost closed receptacle enclosing `id`, if any.
    pub fn enclosing_closed(&self, id: &str) -> Option<&str> {
        self.ancestors(id)
            .into_iter()
            .rfind(|p| {
                self.objects
                    .get(*p)
                    .is_some_and(|o| o.properties.openable && !o.state.is_open)
            })
    }

    /// Checks every structural invariant, returning a description of the first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (key, o) in &self.objects {
            if key != &o.id {
                return Err(format!("object key {key} does not match id {}", o.id));
            }
            for flag in StateFlag::ALL {
                if o.state.get(flag) && !flag.required_capability(&o.properties) {
                    return Err(format!("{} has {} without the matching capability", o.id, flag.name()));
                }
            }
            if o.held_by.is_some() && o.parent_receptacle.is_some() {
                return Err(format!("{} is both held and inside a receptacle", o.id));
            }
            if let Some(p) = &o.parent_receptacle {
                if !self.objects.contains_key(p) {
                    return Err(format!("{} references missing receptacle {p}", o.id));
                }
            }
            if let Some(a) = o.held_by {
                let holder = self.agents.get(&a).and_then(|s| s.holding.as_deref());
                if holder != Some(o.id.as_str()) {
                    return Err(format!("{} is held by {a} but the agent disagrees", o.id));
                }
            }
            if self.ancestors(&o.id).len() != self.chain_len(&o.id) {
                return Err(format!("containment cycle through {}", o.id));
            }
        }
        for (a, s) in &self.agents {
            if let Some(h) = &s.holding {
                match self.objects.get(h) {
                    Some(o) if o.held_by == Some(*a) => {}
                    _ => return Err(format!("{a} holds {h} but the object disagrees")),
                }
            }
        }
        Ok(())
    }

    fn chain_len(&self, id: &str) -> usize {
        let mut n = 0;
        let mut cur = self.objects.get(id).and_then(|o| o.parent_receptacle.as_deref());
        while let Some(p) = cur {
            n += 1;
            if n > self.objects.len() {
                return usize::MAX;
            }
            cur = self.objects.get(p).and_then(|o| o.parent_receptacle.as_deref());
        }
        n
    }
}
