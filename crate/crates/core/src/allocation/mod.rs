//! Affordance-based assignment of plan steps to the human or the robot.
//!
//! A skill's capability for an agent is the conjunction of its atomic
//! capabilities and its cost is the sum of the atomic costs. Three allocators
//! are provided: rule-based (cost argmin, robot on ties), LLM-based and a
//! seeded uniform random baseline.

mod llm;

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planscript::PlanScript;
use crate::skills::{ActionGate, SkillInvocation, SkillTable};
use crate::world::{ActionKind, AgentId};

pub use llm::{allocate_llm, render_affordances};
pub(crate) use llm::allocate_llm_with;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileDoc {
    capabilities: BTreeSet<ActionKind>,
    costs: BTreeMap<ActionKind, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffordanceProfile {
    pub agent: AgentId,
    pub capabilities: BTreeSet<ActionKind>,
    pub costs: BTreeMap<ActionKind, f64>,
}

impl AffordanceProfile {
    pub fn can(&self, action: ActionKind) -> bool {
        self.capabilities.contains(&action)
    }

    pub fn cost(&self, action: ActionKind) -> f64 {
        self.costs.get(&action).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum AllocError {
    #[error("invalid profile file: {0}")]
    Profile(String),
    #[error("no agent can perform step {step} ({skill})")]
    NoCapableAgent { step: usize, skill: String },
    #[error("assignment covers {got} steps but the plan has {expected}")]
    Coverage { expected: usize, got: usize },
    #[error("allocation reply unusable: {0}")]
    Unparseable(String),
    #[error(transparent)]
    Backend(#[from] crate::llm::LlmError),
    #[error(transparent)]
    Template(#[from] crate::prompts::TemplateError),
}

/// Atomic-action affordances for every agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Profiles {
    by_agent: BTreeMap<AgentId, AffordanceProfile>,
}

impl Profiles {
    /// Parses `{agent: {capabilities: [...], costs: {action: n}}}`.
    pub fn from_json(text: &str) -> Result<Profiles, AllocError> {
        let docs: BTreeMap<AgentId, ProfileDoc> =
            serde_json::from_str(text).map_err(|e| AllocError::Profile(e.to_string()))?;
        let mut by_agent = BTreeMap::new();
        for (agent, doc) in docs {
            for a in &doc.capabilities {
                match doc.costs.get(a) {
                    Some(c) if c.is_finite() && *c >= 0.0 => {}
                    Some(c) => return Err(AllocError::Profile(format!("{agent}: cost of {a} is {c}"))),
                    None => return Err(AllocError::Profile(format!("{agent}: no cost for {a}"))),
                }
            }
            by_agent.insert(
                agent,
                AffordanceProfile {
                    agent,
                    capabilities: doc.capabilities,
                    costs: doc.costs,
                },
            );
        }
        Profiles::new(by_agent.into_values().collect())
    }

    pub fn new(profiles: Vec<AffordanceProfile>) -> Result<Profiles, AllocError> {
        let by_agent: BTreeMap<_, _> = profiles.into_iter().map(|p| (p.agent, p)).collect();
        if let Some(a) = AgentId::ALL.into_iter().find(|a| !by_agent.contains_key(a)) {
            return Err(AllocError::Profile(format!("no profile for {a}")));
        }
        Ok(Profiles { by_agent })
    }

    /// The shipped defaults: the robot cannot slice or break and costs 1 per
    /// action; the human can do everything at 2 per action.
    pub fn bundled() -> Profiles {
        Profiles::from_json(crate::fixtures::PROFILES_JSON).expect("bundled profiles")
    }

    /// Every agent capable of everything at the same cost.
    pub fn uniform(cost: f64) -> Profiles {
        let all: BTreeSet<ActionKind> = ActionKind::ALL.into_iter().collect();
        Profiles::new(
            AgentId::ALL
                .into_iter()
                .map(|agent| AffordanceProfile {
                    agent,
                    capabilities: all.clone(),
                    costs: all.iter().map(|a| (*a, cost)).collect(),
                })
                .collect(),
        )
        .expect("both agents present")
    }

    pub fn get(&self, agent: AgentId) -> &AffordanceProfile {
        &self.by_agent[&agent]
    }

    pub fn iter(&self) -> impl Iterator<Item = &AffordanceProfile> {
        self.by_agent.values()
    }
}

impl ActionGate for Profiles {
    fn permits(&self, agent: AgentId, action: ActionKind) -> bool {
        self.by_agent.get(&agent).is_some_and(|p| p.can(action))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentAffordance {
    pub capable: bool,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SkillAffordance {
    pub skill: SkillInvocation,
    pub per_agent: BTreeMap<AgentId, AgentAffordance>,
}

impl SkillAffordance {
    pub fn of(&self, agent: AgentId) -> AgentAffordance {
        self.per_agent[&agent]
    }

    pub fn capable_agents(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.per_agent.iter().filter(|(_, a)| a.capable).map(|(id, _)| *id)
    }
}

/// Per-step affordances on the bundled skill table.
pub fn skill_affordances(plan: &PlanScript, profiles: &Profiles) -> Vec<SkillAffordance> {
    skill_affordances_with(SkillTable::bundled(), plan, profiles)
}

/// Per-step affordances. Steps whose skill is unknown or mis-applied are capable for no one.
pub fn skill_affordances_with(table: &SkillTable, plan: &PlanScript, profiles: &Profiles) -> Vec<SkillAffordance> {
    plan.invocations
        .iter()
        .map(|inv| {
            let def = table.resolve(inv).ok();
            let per_agent = profiles
                .iter()
                .map(|p| {
                    let aff = match def {
                        Some(d) => AgentAffordance {
                            capable: d.action_kinds().all(|a| p.can(a)),
                            cost: d.action_kinds().map(|a| p.cost(a)).sum(),
                        },
                        None => AgentAffordance {
                            capable: false,
                            cost: 0.0,
                        },
                    };
                    (p.agent, aff)
                })
                .collect();
            SkillAffordance {
                skill: SkillInvocation {
                    agent: None,
                    ..inv.clone()
                },
                per_agent,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "camelCase")]
pub enum AllocMode {
    RuleBased,
    LlmBased,
    Random { seed: u64 },
}

impl AllocMode {
    pub fn name(self) -> &'static str {
        match self {
            AllocMode::RuleBased => "rule",
            AllocMode::LlmBased => "llm",
            AllocMode::Random { .. } => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub mode: AllocMode,
    pub agents: Vec<AgentId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignedStep {
    pub step: usize,
    pub agent: AgentId,
}

impl Assignment {
    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    /// Export form: `[{step, agent}]`.
    pub fn steps(&self) -> Vec<AssignedStep> {
        self.agents
            .iter()
            .enumerate()
            .map(|(step, &agent)| AssignedStep { step, agent })
            .collect()
    }

    /// Steps on which both assignments pick the same agent.
    pub fn agreement(&self, reference: &Assignment) -> usize {
        self.agents
            .iter()
            .zip(&reference.agents)
            .filter(|(a, b)| a == b)
            .count()
    }
}

/// Cost of `assignment`, or `None` when some step goes to an incapable agent.
pub fn assignment_cost(affordances: &[SkillAffordance], assignment: &Assignment) -> Option<f64> {
    if affordances.len() != assignment.len() {
        return None;
    }
    affordances
        .iter()
        .zip(&assignment.agents)
        .map(|(aff, agent)| {
            let a = aff.of(*agent);
            a.capable.then_some(a.cost)
        })
        .sum()
}

/// Per step, the cheapest capable agent, the robot winning ties.
pub fn allocate_rule_based(plan: &PlanScript, affordances: &[SkillAffordance]) -> Result<Assignment, AllocError> {
    if affordances.len() != plan.len() {
        return Err(AllocError::Coverage {
            expected: plan.len(),
            got: affordances.len(),
        });
    }
    let agents = affordances
        .iter()
        .enumerate()
        .map(|(step, aff)| {
            let mut best: Option<(AgentId, f64)> = None;
            for agent in [AgentId::Robot, AgentId::Human] {
                let a = aff.of(agent);
                if a.capable && best.is_none_or(|(_, c)| a.cost < c) {
                    best = Some((agent, a.cost));
                }
            }
            best.map(|(agent, _)| agent).ok_or_else(|| AllocError::NoCapableAgent {
                step,
                skill: aff.skill.to_string(),
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(Assignment {
        mode: AllocMode::RuleBased,
        agents,
    })
}

/// Independent fair coin per step from a ChaCha8 stream seeded with `seed`.
pub fn allocate_random(plan: &PlanScript, seed: u64) -> Assignment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let agents = plan
        .invocations
        .iter()
        .map(|_| if rng.random_bool(0.5) { AgentId::Human } else { AgentId::Robot })
        .collect();
    Assignment {
        mode: AllocMode::Random { seed },
        agents,
    }
}

/// Sets each step's agent tag. Order and arguments are untouched.
pub fn rewrite_plan(plan: &PlanScript, assignment: &Assignment) -> Result<PlanScript, AllocError> {
    if assignment.len() != plan.len() {
        return Err(AllocError::Coverage {
            expected: plan.len(),
            got: assignment.len(),
        });
    }
    let mut out = plan.clone();
    for (inv, agent) in out.invocations.iter_mut().zip(&assignment.agents) {
        inv.agent = Some(*agent);
    }
    Ok(out)
}
