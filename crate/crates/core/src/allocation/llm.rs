use super::{AllocError, AllocMode, Assignment, Profiles};
use crate::llm::{ChatBackend, ChatRequest, LlmError, Stage};
use crate::planscript::{extract_fenced, parse, serialize, PlanScript};
use crate::prompts::Templates;
use crate::skills::SkillTable;
use crate::world::{ActionKind, AgentId};

/// One line per agent listing what it can do and at what cost.
pub fn render_affordances(profiles: &Profiles) -> String {
    let mut out = String::new();
    for p in profiles.iter() {
        let can: Vec<String> = ActionKind::ALL
            .into_iter()
            .filter(|a| p.can(*a))
            .map(|a| format!("{a} ({})", p.cost(a)))
            .collect();
        let cannot: Vec<&str> = ActionKind::ALL
            .into_iter()
            .filter(|a| !p.can(*a))
            .map(ActionKind::name)
            .collect();
        out.push_str(&format!("{}: {}", p.agent, can.join(", ")));
        if !cannot.is_empty() {
            out.push_str(&format!("; cannot: {}", cannot.join(", ")));
        }
        out.push('\n');
    }
    out
}

fn read_reply(plan: &PlanScript, reply: &str) -> Result<Vec<AgentId>, String> {
    let (body, _) = extract_fenced(reply);
    let tagged = parse(body).map_err(|e| e.to_string())?;
    if tagged.len() != plan.len() {
        return Err(format!("expected {} lines, got {}", plan.len(), tagged.len()));
    }
    tagged
        .invocations
        .iter()
        .zip(&plan.invocations)
        .enumerate()
        .map(|(i, (got, want))| {
            if got.skill != want.skill || got.args != want.args {
                return Err(format!("line {} changed from {want} to {got}", i + 1));
            }
            got.agent.ok_or_else(|| format!("line {} has no agent tag", i + 1))
        })
        .collect()
}

/// Asks the model to tag every step, with one repair if the reply is malformed.
pub fn allocate_llm(
    plan: &PlanScript,
    profiles: &Profiles,
    table: &SkillTable,
    backend: &dyn ChatBackend,
    templates: &Templates,
) -> Result<Assignment, AllocError> {
    allocate_llm_with(plan, profiles, table, templates, &mut |req| backend.complete(&req))
}

pub(crate) fn allocate_llm_with(
    plan: &PlanScript,
    profiles: &Profiles,
    table: &SkillTable,
    templates: &Templates,
    ask: &mut dyn FnMut(ChatRequest) -> Result<String, LlmError>,
) -> Result<Assignment, AllocError> {
    let plan_text = serialize(&plan.untagged());
    let affordances = render_affordances(profiles);
    let skills = table.render();
    let mut issues = String::new();
    for attempt in 0..2 {
        let user = templates.allocate.render(&[
            ("affordances", &affordances),
            ("skills", &skills),
            ("plan", &plan_text),
            ("issues", &issues),
        ])?;
        let reply = ask(ChatRequest::new(Stage::Allocate, templates.system.text(), user))?;
        match read_reply(plan, &reply) {
            Ok(agents) => {
                return Ok(Assignment {
                    mode: AllocMode::LlmBased,
                    agents,
                })
            }
            Err(e) if attempt == 0 => issues = format!("\nYour previous answer could not be used: {e}\n"),
            Err(e) => return Err(AllocError::Unparseable(e)),
        }
    }
    unreachable!()
}
