use serde::{Deserialize, Serialize};

use crate::world::{Scene, StateFlag};

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlagTest {
    pub kind: String,
    pub flag: StateFlag,
    #[serde(default = "yes")]
    pub value: bool,
}

/// Some object of `kind` sits directly inside a receptacle of kind `receptacle`.
/// `kind` may be `"*"` to match any object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InTest {
    pub kind: String,
    pub receptacle: String,
}

/// A predicate tree over scene state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Goal {
    All(Vec<Goal>),
    Any(Vec<Goal>),
    Not(Box<Goal>),
    /// Some object of the kind has the flag at the given value.
    Exists(FlagTest),
    /// Every object of the kind has the flag at the given value.
    AllOf(FlagTest),
    In(InTest),
}

impl Goal {
    pub fn trivial() -> Goal {
        Goal::All(Vec::new())
    }

    /// Kinds the predicate mentions, excluding the wildcard.
    pub fn kinds(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_kinds(&mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    fn collect_kinds<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Goal::All(gs) | Goal::Any(gs) => gs.iter().for_each(|g| g.collect_kinds(out)),
            Goal::Not(g) => g.collect_kinds(out),
            Goal::Exists(t) | Goal::AllOf(t) => out.push(&t.kind),
            Goal::In(t) => {
                if t.kind != "*" {
                    out.push(&t.kind);
                }
                out.push(&t.receptacle);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GoalEvaluation {
    pub satisfied: bool,
    pub warnings: Vec<String>,
}

/// Evaluates a goal; references to kinds absent from the scene are false and warned about.
pub fn evaluate_goal(scene: &Scene, goal: &Goal) -> GoalEvaluation {
    let mut warnings = Vec::new();
    let satisfied = eval(scene, goal, &mut warnings);
    GoalEvaluation { satisfied, warnings }
}

pub fn goal_satisfied(scene: &Scene, goal: &Goal) -> bool {
    evaluate_goal(scene, goal).satisfied
}

fn known(scene: &Scene, kind: &str, warnings: &mut Vec<String>) -> bool {
    if scene.objects.values().any(|o| o.kind == kind) {
        true
    } else {
        warnings.push(format!("goal references kind {kind} absent from scene {}", scene.id));
        false
    }
}

// No short-circuit: every branch runs so all warnings are collected.
#[allow(clippy::unnecessary_fold)]
fn eval(scene: &Scene, goal: &Goal, warnings: &mut Vec<String>) -> bool {
    match goal {
        Goal::All(gs) => gs.iter().fold(true, |acc, g| eval(scene, g, warnings) && acc),
        Goal::Any(gs) => gs.iter().fold(false, |acc, g| eval(scene, g, warnings) || acc),
        Goal::Not(g) => !eval(scene, g, warnings),
        Goal::Exists(t) => {
            known(scene, &t.kind, warnings)
                && scene
                    .objects
                    .values()
                    .any(|o| o.kind == t.kind && o.state.get(t.flag) == t.value)
        }
        Goal::AllOf(t) => {
            known(scene, &t.kind, warnings)
                && scene
                    .objects
                    .values()
                    .filter(|o| o.kind == t.kind)
                    .all(|o| o.state.get(t.flag) == t.value)
        }
        Goal::In(t) => {
            let kind_ok = t.kind == "*" || known(scene, &t.kind, warnings);
            let rec_ok = known(scene, &t.receptacle, warnings);
            kind_ok
                && rec_ok
                && scene.objects.values().any(|o| {
                    (t.kind == "*" || o.kind == t.kind)
                        && o.parent_receptacle
                            .as_deref()
                            .and_then(|p| scene.objects.get(p))
                            .is_some_and(|p| p.kind == t.receptacle)
                })
        }
    }
}
