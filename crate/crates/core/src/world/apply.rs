use super::{ActionError, AgentId, AtomicAction, ErrorKind, ObjectInstance, Scene};

/// Applies one atomic action for `agent`, returning the successor scene.
///
/// Preconditions are checked in a fixed order and the first violation is
/// reported: object existence, agent presence, reachability of the target
/// (not inside a closed receptacle), agent location (every action except
/// `GoToObject` and `ThrowObject` requires the agent to be at the target),
/// capabilities, then state. On error the input scene is untouched.
pub fn apply_action(scene: &Scene, agent: AgentId, action: &AtomicAction) -> Result<Scene, ActionError> {
    let fail = |kind: ErrorKind, detail: String| Err(ActionError::new(kind, action, detail));

    for id in action.ids() {
        if !scene.objects.contains_key(id) {
            return fail(ErrorKind::UnknownObject, format!("object {id} does not exist"));
        }
    }
    let Some(agent_state) = scene.agents.get(&agent) else {
        return fail(
            ErrorKind::PreconditionFailed,
            format!("agent {agent} is not present in the scene"),
        );
    };

    let target = action.target();
    if let Some(closed) = scene.enclosing_closed(target) {
        return fail(
            ErrorKind::ReceptacleClosed,
            format!("{target} is inside closed {closed}"),
        );
    }

    if !matches!(action, AtomicAction::GoToObject(_) | AtomicAction::ThrowObject(_))
        && agent_state.location.as_deref() != Some(target)
    {
        return fail(ErrorKind::PreconditionFailed, format!("{agent} is not at {target}"));
    }

    let obj = |id: &str| -> &ObjectInstance { &scene.objects[id] };
    let holding = agent_state.holding.as_deref();
    let require_holding = |tool: &str| -> Result<(), ActionError> {
        match holding {
            Some(h) if h == tool => Ok(()),
            Some(h) => Err(ActionError::new(
                ErrorKind::PreconditionFailed,
                action,
                format!("{agent} is holding {h}, not {tool}"),
            )),
            None => Err(ActionError::new(
                ErrorKind::HandEmpty,
                action,
                format!("{agent} is not holding {tool}"),
            )),
        }
    };

    let mut next = scene.clone();
    match action {
        AtomicAction::GoToObject(o) => {
            next.agents.get_mut(&agent).unwrap().location = Some(o.clone());
        }
        AtomicAction::OpenObject(o) | AtomicAction::CloseObject(o) => {
            let opening = matches!(action, AtomicAction::OpenObject(_));
            if !obj(o).properties.openable {
                return fail(ErrorKind::MissingCapability, format!("{o} is not openable"));
            }
            if obj(o).state.is_open == opening {
                let what = if opening { "open" } else { "closed" };
                return fail(ErrorKind::PreconditionFailed, format!("{o} is already {what}"));
            }
            next.objects.get_mut(o).unwrap().state.is_open = opening;
        }
        AtomicAction::BreakObject(o) => {
            if !obj(o).properties.breakable {
                return fail(ErrorKind::MissingCapability, format!("{o} is not breakable"));
            }
            if obj(o).state.is_broken {
                return fail(ErrorKind::PreconditionFailed, format!("{o} is already broken"));
            }
            next.objects.get_mut(o).unwrap().state.is_broken = true;
        }
        AtomicAction::SliceObject(o, t) => {
            if !obj(o).properties.sliceable {
                return fail(ErrorKind::MissingCapability, format!("{o} is not sliceable"));
            }
            if !obj(t).properties.sharp {
                return fail(ErrorKind::NotSharpTool, format!("{t} is not a sharp tool"));
            }
            require_holding(t)?;
            if obj(o).state.is_sliced {
                return fail(ErrorKind::PreconditionFailed, format!("{o} is already sliced"));
            }
            next.objects.get_mut(o).unwrap().state.is_sliced = true;
        }
        AtomicAction::SwitchOn(o) | AtomicAction::SwitchOff(o) => {
            let on = matches!(action, AtomicAction::SwitchOn(_));
            if !obj(o).properties.toggleable {
                return fail(ErrorKind::MissingCapability, format!("{o} is not toggleable"));
            }
            if obj(o).state.is_toggled == on {
                let what = if on { "on" } else { "off" };
                return fail(ErrorKind::PreconditionFailed, format!("{o} is already {what}"));
            }
            next.objects.get_mut(o).unwrap().state.is_toggled = on;
        }
        AtomicAction::CleanObject(o, t, d) => {
            if !obj(o).properties.dirtyable {
                return fail(ErrorKind::MissingCapability, format!("{o} is not dirtyable"));
            }
            if !obj(t).properties.cleaning_tool {
                return fail(ErrorKind::MissingCapability, format!("{t} is not a cleaning tool"));
            }
            if !obj(d).properties.detergent {
                return fail(ErrorKind::MissingCapability, format!("{d} is not a detergent"));
            }
            require_holding(t)?;
            if !obj(d).state.is_used_up {
                return fail(
                    ErrorKind::PreconditionFailed,
                    format!("{d} has not been used up in this skill"),
                );
            }
            if !scene.consumed_this_skill.contains(d.as_str()) {
                return fail(ErrorKind::DetergentUsedUp, format!("{d} was used up before this skill"));
            }
            if !obj(o).state.is_dirty {
                return fail(ErrorKind::PreconditionFailed, format!("{o} is not dirty"));
            }
            next.objects.get_mut(o).unwrap().state.is_dirty = false;
        }
        AtomicAction::PickUpObject(o) => {
            if !obj(o).properties.pickupable {
                return fail(ErrorKind::MissingCapability, format!("{o} is not pickupable"));
            }
            match holding {
                Some(h) if h == o => return Ok(next),
                Some(h) => {
                    return fail(ErrorKind::HandOccupied, format!("{agent} is already holding {h}"))
                }
                None => {}
            }
            if let Some(other) = obj(o).held_by {
                return fail(ErrorKind::PreconditionFailed, format!("{o} is held by {other}"));
            }
            let item = next.objects.get_mut(o).unwrap();
            item.held_by = Some(agent);
            item.parent_receptacle = None;
            next.agents.get_mut(&agent).unwrap().holding = Some(o.clone());
        }
        AtomicAction::PutObject(r) => {
            if !obj(r).properties.receptacle {
                return fail(ErrorKind::MissingCapability, format!("{r} is not a receptacle"));
            }
            let Some(h) = holding else {
                return fail(ErrorKind::HandEmpty, format!("{agent} is not holding anything"));
            };
            if obj(r).properties.openable && !obj(r).state.is_open {
                return fail(ErrorKind::ReceptacleClosed, format!("{r} is closed"));
            }
            if h == r || scene.ancestors(r).contains(&h) {
                return fail(ErrorKind::PreconditionFailed, format!("{h} cannot be put inside {r}"));
            }
            let item = next.objects.get_mut(h).unwrap();
            item.held_by = None;
            item.parent_receptacle = Some(r.clone());
            next.agents.get_mut(&agent).unwrap().holding = None;
        }
        AtomicAction::ThrowObject(o) => {
            require_holding(o)?;
            let item = next.objects.get_mut(o).unwrap();
            item.held_by = None;
            item.parent_receptacle = None;
            next.agents.get_mut(&agent).unwrap().holding = None;
        }
        AtomicAction::UseUpObject(o) => {
            if !obj(o).properties.can_be_used_up {
                return fail(ErrorKind::MissingCapability, format!("{o} cannot be used up"));
            }
            if obj(o).state.is_used_up {
                return fail(ErrorKind::PreconditionFailed, format!("{o} is already used up"));
            }
            next.objects.get_mut(o).unwrap().state.is_used_up = true;
            next.consumed_this_skill.insert(o.clone());
        }
    }
    Ok(next)
}
