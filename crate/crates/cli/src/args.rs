use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use taskweave_core::allocation::AllocMode;
use taskweave_core::harness::StdKind;
use taskweave_core::llm::LiveConfig;
use taskweave_core::pipeline::{Budgets, SessionConfig};
use taskweave_core::prompts::Templates;

use crate::Usage;

#[derive(Debug, Parser)]
#[command(name = "taskweave", version, about = "Household task planning with a human in the loop")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan and execute one task in one scene.
    Run(RunArgs),
    /// Sweep a task suite over feedback budgets and write metric reports.
    Eval(EvalArgs),
    /// Re-run a logged session against a recorded transcript.
    Replay(ReplayArgs),
    /// Start the HTTP service.
    Serve(ServeArgs),
    /// Validate scene, suite, template or plan files.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    #[default]
    Mock,
    Replay,
    Live,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum AllocArg {
    #[default]
    Rule,
    Llm,
    Random,
}

impl AllocArg {
    pub fn mode(self, seed: Option<u64>) -> Result<AllocMode, Usage> {
        match (self, seed) {
            (AllocArg::Rule, _) => Ok(AllocMode::RuleBased),
            (AllocArg::Llm, _) => Ok(AllocMode::LlmBased),
            (AllocArg::Random, Some(seed)) => Ok(AllocMode::Random { seed }),
            (AllocArg::Random, None) => Err(Usage("--alloc random needs --seed".into())),
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct LiveArgs {
    /// Chat-completions endpoint for the live backend.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long)]
    pub api_key_env: Option<String>,
}

impl LiveArgs {
    pub fn config(&self) -> LiveConfig {
        let mut c = LiveConfig::default();
        if let Some(e) = &self.endpoint {
            c.endpoint = e.clone();
        }
        if let Some(m) = &self.model {
            c.model = m.clone();
        }
        if let Some(k) = &self.api_key_env {
            c.api_key_env = k.clone();
        }
        c
    }
}

/// Options shared by everything that runs a single session.
#[derive(Debug, Clone, Default, Args)]
pub struct SessionArgs {
    #[arg(long, value_enum, default_value_t)]
    pub backend: BackendArg,
    /// Mock script (JSON). Defaults to the suite entry for the same scene and task.
    #[arg(long)]
    pub mock: Option<PathBuf>,
    /// Transcript to serve replies from with `--backend replay`.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    /// Append every exchange to this transcript.
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// Suite used to look up mock scripts and oracle goals.
    #[arg(long)]
    pub suite: Option<PathBuf>,
    /// Directory of `<name>.v1.txt` prompt templates overriding the bundled ones.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Feedback and refinement budget.
    #[arg(long)]
    pub budget: Option<u32>,
    #[arg(long)]
    pub max_feedback: Option<u32>,
    #[arg(long)]
    pub max_refine: Option<u32>,
    #[arg(long, value_enum, default_value_t)]
    pub alloc: AllocArg,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Stamp every event with the same timestamp.
    #[arg(long)]
    pub fixed_clock: bool,
    #[command(flatten)]
    pub live: LiveArgs,
}

impl SessionArgs {
    pub fn session_config(&self, templates: Arc<Templates>) -> Result<SessionConfig, Usage> {
        let mut budgets = self.budget.map(Budgets::uniform).unwrap_or_default();
        if let Some(n) = self.max_feedback {
            budgets.max_feedback = n;
        }
        if let Some(n) = self.max_refine {
            budgets.max_refine = n;
        }
        Ok(SessionConfig::default()
            .with_budgets(budgets)
            .with_alloc(self.alloc.mode(self.seed)?)
            .with_templates(templates))
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Bundled scene id or scene file.
    #[arg(long)]
    pub scene: String,
    #[arg(long)]
    pub task: String,
    /// Review with the suite entry's goal instead of asking on the terminal.
    #[arg(long, conflicts_with = "approve")]
    pub oracle: bool,
    /// Approve every plan without asking.
    #[arg(long)]
    pub approve: bool,
    #[command(flatten)]
    pub session: SessionArgs,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// `events.jsonl` of the session to re-run.
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long)]
    pub transcript: PathBuf,
    /// Scene file, when the logged scene is not bundled.
    #[arg(long)]
    pub scene: Option<String>,
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub fixed_clock: bool,
}

/// Budget list: `3`, `0..5` (inclusive), `0..=5` or `0,2,5`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BudgetList(pub Vec<u32>);

impl FromStr for BudgetList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| t.trim().parse::<u32>().map_err(|_| format!("invalid budget {t:?}"));
        let list = if let Some((a, b)) = s.split_once("..") {
            let (lo, hi) = (num(a)?, num(b.trim_start_matches('='))?);
            if lo > hi {
                return Err(format!("empty budget range {s}"));
            }
            (lo..=hi).collect()
        } else {
            s.split(',').map(num).collect::<Result<Vec<_>, _>>()?
        };
        Ok(BudgetList(list))
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Suite file (JSON). Defaults to the bundled suite.
    #[arg(long)]
    pub suite: Option<PathBuf>,
    #[arg(long, default_value = "0..5")]
    pub budgets: BudgetList,
    #[arg(long, value_enum, default_value_t)]
    pub alloc: AllocArg,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t)]
    pub backend: BackendArg,
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    #[arg(long)]
    pub record: Option<PathBuf>,
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    pub std: StdArg,
    /// Run entries one at a time.
    #[arg(long)]
    pub sequential: bool,
    #[command(flatten)]
    pub live: LiveArgs,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum StdArg {
    #[default]
    Sample,
    Population,
}

impl From<StdArg> for StdKind {
    fn from(a: StdArg) -> StdKind {
        match a {
            StdArg::Sample => StdKind::Sample,
            StdArg::Population => StdKind::Population,
        }
    }
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
    /// Append event logs here and recover them read-only on start.
    #[arg(long)]
    pub persist: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub max_sessions: usize,
    #[arg(long)]
    pub suite: Option<PathBuf>,
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Allow sessions with `backend: live`.
    #[arg(long)]
    pub enable_live: bool,
    #[command(flatten)]
    pub live: LiveArgs,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Bundled scene id or scene file.
    #[arg(long)]
    pub scene: Option<String>,
    #[arg(long)]
    pub suite: Option<PathBuf>,
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Plan script to parse, and run in `--scene` if given.
    #[arg(long)]
    pub plan: Option<PathBuf>,
}
