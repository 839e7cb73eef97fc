use std::io::Write;
use std::path::Path;

use serde_json::json;
use taskweave_core::pipeline::Session;

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn pretty(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("artifact serializes") + "\n"
}

/// `events.jsonl`, `plan.txt`, `trace.json` and `assignment.json`.
pub fn write_session(dir: &Path, session: &Session) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut events = String::new();
    for e in session.history() {
        events.push_str(&serde_json::to_string(e).expect("event serializes"));
        events.push('\n');
    }
    write_atomic(&dir.join("events.jsonl"), &events)?;
    let st = session.state();
    write_atomic(&dir.join("plan.txt"), &st.plan_text().unwrap_or_default())?;
    write_atomic(&dir.join("trace.json"), &pretty(&st.trace))?;
    let assignment = st.allocation.as_ref().map(|a| {
        json!({
            "mode": a.mode,
            "agents": a.assignment.as_ref().map(|x| &x.agents),
            "cost": a.cost,
            "success": a.success,
            "error": a.error,
            "plan": a.assignment.as_ref().and(st.plan_text()),
        })
    });
    write_atomic(&dir.join("assignment.json"), &pretty(&assignment))
}
