//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use proptest::prelude::*;
use taskweave_core::allocation::{AgentAffordance, SkillAffordance};
use taskweave_core::planscript::PlanScript;
use taskweave_core::skills::SkillInvocation;
use taskweave_core::world::{ActionKind, AgentId, AtomicAction, Scene, StateFlag};

pub const GHOST: &str = "Ghost_1";

fn closed_ancestor(scene: &Scene, id: &str) -> bool {
    let mut seen = BTreeSet::new();
    let mut cur = scene.objects[id].parent_receptacle.clone();
    while let Some(p) = cur {
        if !seen.insert(p.clone()) {
            return false;
        }
        let o = &scene.objects[&p];
        if o.properties.openable && !o.state.is_open {
            return true;
        }
        cur = o.parent_receptacle.clone();
    }
    false
}

fn is_ancestor(scene: &Scene, ancestor: &str, id: &str) -> bool {
    let mut cur = scene.objects[id].parent_receptacle.clone();
    let mut steps = 0;
    while let Some(p) = cur {
        if p == ancestor {
            return true;
        }
        steps += 1;
        if steps > scene.objects.len() {
            return false;
        }
        cur = scene.objects[&p].parent_receptacle.clone();
    }
    false
}

/// Success successor of `action`, computed as the conjunction of every
/// precondition the action has, with no ordering between them.
pub fn oracle_apply(scene: &Scene, agent: AgentId, action: &AtomicAction) -> Option<Scene> {
    let ids: Vec<&str> = action.ids();
    if !ids.iter().all(|id| scene.objects.contains_key(*id)) {
        return None;
    }
    let me = scene.agents.get(&agent)?;
    let target = ids[0];
    if closed_ancestor(scene, target) {
        return None;
    }
    let kind = action.kind();
    if !matches!(kind, ActionKind::GoToObject | ActionKind::ThrowObject) && me.location.as_deref() != Some(target) {
        return None;
    }
    let holding = me.holding.clone();
    let obj = |id: &str| &scene.objects[id];
    let o = obj(target);
    let mut next = scene.clone();
    let ok = match kind {
        ActionKind::GoToObject => {
            next.agents.get_mut(&agent).unwrap().location = Some(target.into());
            true
        }
        ActionKind::OpenObject | ActionKind::CloseObject => {
            let want = kind == ActionKind::OpenObject;
            next.objects.get_mut(target).unwrap().state.is_open = want;
            o.properties.openable && o.state.is_open != want
        }
        ActionKind::BreakObject => {
            next.objects.get_mut(target).unwrap().state.is_broken = true;
            o.properties.breakable && !o.state.is_broken
        }
        ActionKind::SwitchOn | ActionKind::SwitchOff => {
            let want = kind == ActionKind::SwitchOn;
            next.objects.get_mut(target).unwrap().state.is_toggled = want;
            o.properties.toggleable && o.state.is_toggled != want
        }
        ActionKind::SliceObject => {
            let t = obj(ids[1]);
            next.objects.get_mut(target).unwrap().state.is_sliced = true;
            o.properties.sliceable && t.properties.sharp && holding.as_deref() == Some(ids[1]) && !o.state.is_sliced
        }
        ActionKind::CleanObject => {
            let (t, d) = (obj(ids[1]), obj(ids[2]));
            next.objects.get_mut(target).unwrap().state.is_dirty = false;
            o.properties.dirtyable
                && t.properties.cleaning_tool
                && d.properties.detergent
                && holding.as_deref() == Some(ids[1])
                && d.state.is_used_up
                && scene.consumed_this_skill.contains(ids[2])
                && o.state.is_dirty
        }
        ActionKind::PickUpObject => {
            if holding.as_deref() == Some(target) {
                o.properties.pickupable
            } else {
                let n = next.objects.get_mut(target).unwrap();
                n.held_by = Some(agent);
                n.parent_receptacle = None;
                next.agents.get_mut(&agent).unwrap().holding = Some(target.into());
                o.properties.pickupable && holding.is_none() && o.held_by.is_none()
            }
        }
        ActionKind::PutObject => match &holding {
            None => false,
            Some(h) => {
                let n = next.objects.get_mut(h.as_str()).unwrap();
                n.held_by = None;
                n.parent_receptacle = Some(target.into());
                next.agents.get_mut(&agent).unwrap().holding = None;
                o.properties.receptacle
                    && !(o.properties.openable && !o.state.is_open)
                    && h != target
                    && !is_ancestor(scene, h, target)
            }
        },
        ActionKind::ThrowObject => {
            let n = next.objects.get_mut(target).unwrap();
            n.held_by = None;
            n.parent_receptacle = None;
            next.agents.get_mut(&agent).unwrap().holding = None;
            holding.as_deref() == Some(target)
        }
        ActionKind::UseUpObject => {
            next.objects.get_mut(target).unwrap().state.is_used_up = true;
            next.consumed_this_skill.insert(target.into());
            o.properties.can_be_used_up && !o.state.is_used_up
        }
    };
    ok.then_some(next)
}

/// Every action over the scene's ids plus one id that does not exist.
pub fn all_actions(scene: &Scene) -> Vec<AtomicAction> {
    let mut ids: Vec<String> = scene.objects.keys().cloned().collect();
    ids.push(GHOST.into());
    let mut out = Vec::new();
    for kind in ActionKind::ALL {
        let mut tuples: Vec<Vec<String>> = vec![vec![]];
        for _ in 0..kind.arity() {
            tuples = tuples
                .into_iter()
                .flat_map(|t| {
                    ids.iter().map(move |id| {
                        let mut t = t.clone();
                        t.push(id.clone());
                        t
                    })
                })
                .collect();
        }
        out.extend(tuples.iter().filter_map(|t| AtomicAction::from_parts(kind, t)));
    }
    out
}

fn subsets<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    (0..1usize << items.len())
        .map(|m| {
            items
                .iter()
                .enumerate()
                .filter(|(i, _)| m >> i & 1 == 1)
                .map(|(_, x)| x.clone())
                .collect()
        })
        .collect()
}

/// All invariant-respecting variants of `base`: every allowed state flag
/// combination, robot location, held objects for both agents, and the set of
/// detergents consumed in the current skill.
pub fn enumerate_states(base: &Scene) -> Vec<Scene> {
    let mut scenes = vec![base.clone()];
    for (id, o) in &base.objects {
        let flags: Vec<StateFlag> = StateFlag::ALL
            .into_iter()
            .filter(|f| f.required_capability(&o.properties))
            .collect();
        scenes = scenes
            .into_iter()
            .flat_map(|s| {
                subsets(&flags).into_iter().map(move |on| {
                    let mut s = s.clone();
                    let st = &mut s.objects.get_mut(id).unwrap().state;
                    for f in StateFlag::ALL {
                        st.set(f, on.contains(&f));
                    }
                    s
                })
            })
            .collect();
    }
    let mut locations: Vec<Option<String>> = vec![None];
    locations.extend(base.objects.keys().cloned().map(Some));
    let mut holds: Vec<Option<String>> = vec![None];
    holds.extend(
        base.objects
            .values()
            .filter(|o| o.properties.pickupable)
            .map(|o| Some(o.id.clone())),
    );
    let usable: Vec<String> = base
        .objects
        .values()
        .filter(|o| o.properties.can_be_used_up)
        .map(|o| o.id.clone())
        .collect();

    let mut out = Vec::new();
    for s in &scenes {
        for loc in &locations {
            for rh in &holds {
                for hh in &holds {
                    if rh.is_some() && rh == hh {
                        continue;
                    }
                    for consumed in subsets(&usable) {
                        let mut v = s.clone();
                        for (agent, held) in [(AgentId::Robot, rh), (AgentId::Human, hh)] {
                            if let Some(h) = held {
                                let o = v.objects.get_mut(h).unwrap();
                                o.parent_receptacle = None;
                                o.held_by = Some(agent);
                            }
                            v.agents.get_mut(&agent).unwrap().holding = held.clone();
                        }
                        v.agents.get_mut(&AgentId::Robot).unwrap().location = loc.clone();
                        v.consumed_this_skill = consumed.into_iter().collect();
                        out.push(v);
                    }
                }
            }
        }
    }
    out
}

/// Lowest total cost over all 2^n capable assignments, by enumeration.
pub fn brute_force_min_cost(affs: &[SkillAffordance]) -> Option<f64> {
    let n = affs.len();
    let mut best: Option<f64> = None;
    for mask in 0..1u32 << n {
        let mut total = 0.0;
        let mut ok = true;
        for (i, a) in affs.iter().enumerate() {
            let agent = if mask >> i & 1 == 1 { AgentId::Human } else { AgentId::Robot };
            let AgentAffordance { capable, cost } = a.of(agent);
            if !capable {
                ok = false;
                break;
            }
            total += cost;
        }
        if ok && best.is_none_or(|b| total < b) {
            best = Some(total);
        }
    }
    best
}

pub const SKILL_NAMES: [(&str, usize); 8] = [
    ("OpenObject", 1),
    ("CloseObject", 1),
    ("BreakObject", 1),
    ("CleanObject", 3),
    ("SwitchOn", 1),
    ("SwitchOff", 1),
    ("PutObjectInReceptacle", 2),
    ("SliceObject", 2),
];

fn arb_id() -> impl Strategy<Value = String> {
    ("[A-Z][a-zA-Z]{0,8}", 1u32..20).prop_map(|(k, n)| format!("{k}_{n}"))
}

fn arb_invocation() -> impl Strategy<Value = SkillInvocation> {
    let skill = prop_oneof![
        4 => (0..SKILL_NAMES.len()).prop_map(|i| SKILL_NAMES[i].0.to_string()),
        1 => "[A-Z][a-zA-Z]{2,12}",
    ];
    let agent = prop_oneof![Just(None), Just(Some(AgentId::Robot)), Just(Some(AgentId::Human))];
    (skill, prop::collection::vec(arb_id(), 1..4), agent).prop_map(|(skill, args, agent)| SkillInvocation {
        skill,
        args,
        agent,
    })
}

/// Plans with text-safe descriptions, known and unknown skills and any arity.
pub fn arb_plan() -> impl Strategy<Value = PlanScript> {
    ("[a-z]{1,8}( [a-z,.]{1,8}){0,4}", prop::collection::vec(arb_invocation(), 0..12))
        .prop_map(|(desc, invocations)| PlanScript::new(desc, invocations))
}

/// Plans over the objects of `ids`, mostly with correct arity.
pub fn arb_plan_over(ids: Vec<String>) -> impl Strategy<Value = PlanScript> {
    let mut pool = ids;
    pool.push(GHOST.to_string());
    let inv = (0..SKILL_NAMES.len() + 1, prop::collection::vec(prop::sample::select(pool), 1..4), any::<bool>())
        .prop_map(|(i, mut args, exact)| {
            let (skill, arity) = SKILL_NAMES.get(i).copied().unwrap_or(("MicrowaveObject", 1));
            if exact {
                args.resize(arity, args[0].clone());
            }
            SkillInvocation {
                skill: skill.into(),
                args,
                agent: None,
            }
        });
    prop::collection::vec(inv, 0..8).prop_map(|v| PlanScript::new("generated", v))
}
