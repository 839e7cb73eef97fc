use crate::world::{ObjectInstance, Scene};

fn location(scene: &Scene, o: &ObjectInstance) -> String {
    if let Some(a) = o.held_by {
        return format!("held by {a}");
    }
    match o.parent_receptacle.as_deref() {
        Some(p) => format!("in {p}"),
        None => match scene.agents.values().find(|a| a.holding.as_deref() == Some(&o.id)) {
            Some(a) => format!("held by {}", a.id),
            None => "in the room".into(),
        },
    }
}

fn list_or_none(items: Vec<&str>) -> String {
    if items.is_empty() {
        "none".into()
    } else {
        items.join(", ")
    }
}

/// One line per object: `Id (Kind): properties; state: flags; location`.
pub fn render_entities<'a>(scene: &Scene, objects: impl IntoIterator<Item = &'a ObjectInstance>) -> String {
    let mut out = String::new();
    for o in objects {
        out.push_str(&format!(
            "{} ({}): {}; state: {}; {}\n",
            o.id,
            o.kind,
            list_or_none(o.properties.names()),
            list_or_none(o.state.names()),
            location(scene, o)
        ));
    }
    if out.is_empty() {
        out.push_str("(none)\n");
    }
    out
}

/// Kind names only, split into portable items and receptacles.
pub fn render_kind_summary(scene: &Scene) -> String {
    let mut items = std::collections::BTreeSet::new();
    let mut places = std::collections::BTreeSet::new();
    for o in scene.objects.values() {
        if o.properties.receptacle {
            places.insert(o.kind.as_str());
        } else {
            items.insert(o.kind.as_str());
        }
    }
    format!(
        "Objects: {}\nReceptacles and locations: {}\n",
        list_or_none(items.into_iter().collect()),
        list_or_none(places.into_iter().collect())
    )
}
