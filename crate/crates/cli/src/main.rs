mod args;
mod artifacts;

use std::collections::BTreeMap;
use std::io::BufReader;
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use serde_json::Value;
use taskweave_core::harness::{run_suite, write_jsonl, BackendSpec, MetricsReport, RunConfig, SuiteEntry, TaskSuite};
use taskweave_core::llm::{ChatBackend, LiveBackend, MockBackend, MockScript, RecordingBackend, ReplayBackend, Transcript, TranscriptWriter};
use taskweave_core::par::Parallelism;
use taskweave_core::pipeline::{
    Clock, Event, FeedbackDecision, FeedbackSource, FixedClock, Phase, Session, SessionConfig, SystemClock, TerminalPrompter,
};
use taskweave_core::planscript;
use taskweave_core::prompts::Templates;
use taskweave_core::world::{load_scene_file, AgentId, Scene};
use taskweave_core::{fixtures, skills};
use taskweave_service::ServiceConfig;

use args::{BackendArg, Cli, Command, EvalArgs, ReplayArgs, RunArgs, ServeArgs, SessionArgs, CheckArgs};

/// Usage or configuration problem: exit 1.
#[derive(Debug)]
struct Usage(String);

impl<E: std::fmt::Display> From<E> for Usage {
    fn from(e: E) -> Self {
        Usage(e.to_string())
    }
}

type Result<T> = std::result::Result<T, Usage>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Replay(a) => cmd_replay(a),
        Command::Serve(a) => cmd_serve(a),
        Command::Check(a) => cmd_check(a),
    };
    match outcome {
        Ok(code) => code,
        Err(Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

/// A bundled scene id, or a path to a scene file.
fn scene(arg: &str) -> Result<Scene> {
    if let Some(s) = fixtures::scene(arg) {
        return Ok(s?);
    }
    if !Path::new(arg).exists() {
        return Err(Usage(format!("no bundled scene or scene file named {arg}")));
    }
    Ok(load_scene_file(arg)?)
}

fn suite(path: Option<&Path>) -> Result<TaskSuite> {
    match path {
        Some(p) => Ok(TaskSuite::load(p)?),
        None => Ok(TaskSuite::bundled()),
    }
}

fn templates(dir: Option<&Path>) -> Result<Arc<Templates>> {
    Ok(Arc::new(match dir {
        Some(d) => Templates::load_dir(d)?,
        None => Templates::bundled(),
    }))
}

fn find_entry<'a>(suite: &'a TaskSuite, scene_id: &str, task: &str) -> Option<&'a SuiteEntry> {
    suite
        .entries
        .iter()
        .find(|e| e.scene_id == scene_id && e.instruction.trim() == task.trim())
}

fn clock(fixed: bool) -> Arc<dyn Clock> {
    if fixed {
        Arc::new(FixedClock::default())
    } else {
        Arc::new(SystemClock)
    }
}

fn chat_backend(a: &SessionArgs, scene: &Scene, task: &str, suite: &TaskSuite) -> Result<Arc<dyn ChatBackend>> {
    let inner: Arc<dyn ChatBackend> = match a.backend {
        BackendArg::Mock => {
            let script: MockScript = match &a.mock {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
                None => find_entry(suite, &scene.id, task)
                    .map(|e| e.mock.clone())
                    .ok_or_else(|| Usage(format!("no mock script for this task in {}; pass --mock", scene.id)))?,
            };
            Arc::new(MockBackend::new(script))
        }
        BackendArg::Replay => {
            let path = a.transcript.as_ref().ok_or_else(|| Usage("--backend replay needs --transcript".into()))?;
            Arc::new(ReplayBackend::new(Arc::new(Transcript::load(path)?)))
        }
        BackendArg::Live => Arc::new(LiveBackend::from_env(a.live.config())?),
    };
    Ok(match &a.record {
        Some(p) => Arc::new(RecordingBackend::new(inner, Arc::new(TranscriptWriter::create(p)?))),
        None => inner,
    })
}

fn run_session(
    a: &SessionArgs,
    scene: Scene,
    task: &str,
    suite: &TaskSuite,
    source: FeedbackSource,
    config: SessionConfig,
) -> Result<ExitCode> {
    let chat = chat_backend(a, &scene, task, suite)?;
    let mut session = Session::new(task, scene, chat, config)?;
    let mut source = source;
    let phase = session.run(&mut source);
    artifacts::write_session(&a.out, &session)?;
    let st = session.state();
    match phase {
        Phase::Done => {
            eprintln!(
                "done: approved={} executed={} feedback rounds={} refinements={}; artifacts in {}",
                st.approved == Some(true),
                st.executed,
                st.feedback_rounds,
                st.refine_rounds,
                a.out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        _ => {
            eprintln!("failed: {}", st.failure.as_deref().unwrap_or("unknown"));
            Ok(ExitCode::from(2))
        }
    }
}

fn cmd_run(a: RunArgs) -> Result<ExitCode> {
    let scene = scene(&a.scene)?;
    let suite = suite(a.session.suite.as_deref())?;
    let source = if a.oracle {
        let entry = find_entry(&suite, &scene.id, &a.task)
            .ok_or_else(|| Usage(format!("--oracle needs a suite entry for this task in {}", scene.id)))?;
        FeedbackSource::Oracle(entry.oracle())
    } else if a.approve {
        FeedbackSource::scripted([])
    } else {
        FeedbackSource::Interactive(Box::new(TerminalPrompter::new(
            BufReader::new(std::io::stdin()),
            std::io::stderr(),
        )))
    };
    let config = a.session.session_config(templates(a.session.templates.as_deref())?)?;
    run_session(&a.session, scene, &a.task, &suite, source, config.with_clock(clock(a.session.fixed_clock)))
}

/// Re-runs a logged session: same scene, task, budgets, allocation and review decisions.
fn cmd_replay(a: ReplayArgs) -> Result<ExitCode> {
    let text = std::fs::read_to_string(&a.log)?;
    let events: Vec<Event> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect::<std::result::Result<_, _>>()?;
    let started = events
        .iter()
        .find(|e| e.event == "started")
        .ok_or_else(|| Usage(format!("{} has no started event", a.log.display())))?;
    let field = |k: &str| -> Result<Value> {
        started
            .payload
            .get(k)
            .cloned()
            .ok_or_else(|| Usage(format!("started event lacks {k}")))
    };
    let task: String = serde_json::from_value(field("instruction")?)?;
    let scene_id: String = serde_json::from_value(field("sceneId")?)?;
    let scene = scene(a.scene.as_deref().unwrap_or(&scene_id))?;
    let decisions: Vec<FeedbackDecision> = events
        .iter()
        .filter(|e| e.event == "feedback")
        .map(|e| match e.payload["text"].as_str() {
            Some(t) if e.payload["decision"] == "revise" => FeedbackDecision::revise(t),
            _ => FeedbackDecision::Approve,
        })
        .collect();
    let config = SessionConfig::default()
        .with_budgets(serde_json::from_value(field("budgets")?)?)
        .with_alloc(serde_json::from_value(field("alloc")?)?)
        .with_templates(templates(a.templates.as_deref())?)
        .with_clock(clock(a.fixed_clock));
    let session_args = SessionArgs {
        backend: BackendArg::Replay,
        transcript: Some(a.transcript),
        templates: a.templates,
        out: a.out,
        fixed_clock: a.fixed_clock,
        ..SessionArgs::default()
    };
    run_session(&session_args, scene, &task, &TaskSuite::bundled(), FeedbackSource::scripted(decisions), config)
}

fn cmd_eval(a: EvalArgs) -> Result<ExitCode> {
    let suite = suite(a.suite.as_deref())?;
    let backend = match a.backend {
        BackendArg::Mock => BackendSpec::Mock,
        BackendArg::Replay => {
            let path = a.transcript.as_ref().ok_or_else(|| Usage("--backend replay needs --transcript".into()))?;
            BackendSpec::Replay(Arc::new(Transcript::load(path)?))
        }
        BackendArg::Live => BackendSpec::Live(a.live.config()),
    };
    let alloc = a.alloc.mode(a.seed)?;
    let mut config = RunConfig::new(backend, a.budgets.0.clone(), alloc).with_parallelism(if a.sequential {
        Parallelism::Sequential
    } else {
        Parallelism::Parallel
    });
    config.templates = templates(a.templates.as_deref())?;
    if let Some(p) = &a.record {
        config = config.with_record(Arc::new(TranscriptWriter::create(p)?));
    }
    let raw = match run_suite(&suite, &config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(1));
        }
    };
    let name = if suite.name.is_empty() { "suite" } else { &suite.name };
    let report = MetricsReport::from_raw(name, config.backend.name(), alloc, &raw, a.std.into());
    std::fs::create_dir_all(&a.out)?;
    artifacts::write_atomic(&a.out.join("raw.jsonl"), &write_jsonl(&raw))?;
    artifacts::write_atomic(&a.out.join("report.json"), &report.to_json())?;
    let table = report.render_text();
    artifacts::write_atomic(&a.out.join("report.txt"), &table)?;
    print!("{table}");
    let failed = raw.iter().filter(|r| r.failure.is_some()).count();
    if failed > 0 {
        let mut reasons: BTreeMap<&str, usize> = BTreeMap::new();
        for r in &raw {
            if let Some(f) = &r.failure {
                *reasons.entry(f.as_str()).or_default() += 1;
            }
        }
        eprintln!("{failed} of {} runs failed:", raw.len());
        for (reason, n) in reasons {
            eprintln!("  {n} x {reason}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_serve(a: ServeArgs) -> Result<ExitCode> {
    let mut config = ServiceConfig {
        max_sessions: a.max_sessions,
        persist_dir: a.persist.clone(),
        templates: templates(a.templates.as_deref())?,
        ..ServiceConfig::default()
    };
    if let Some(p) = &a.suite {
        config.suite = Arc::new(TaskSuite::load(p)?);
    }
    if let Some(p) = &a.transcript {
        config.transcript = Some(Arc::new(Transcript::load(p)?));
    }
    if a.enable_live {
        config.live = Some(a.live.config());
    }
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&a.addr)
            .await
            .map_err(|e| Usage(format!("cannot listen on {}: {e}", a.addr)))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        taskweave_service::serve_on(config, listener, shutdown).await?;
        Ok(ExitCode::SUCCESS)
    })
}

fn cmd_check(a: CheckArgs) -> Result<ExitCode> {
    let mut checked = 0;
    let scene = match &a.scene {
        Some(s) => {
            let scene = scene(s)?;
            eprintln!("scene {}: {} objects", scene.id, scene.objects.len());
            checked += 1;
            Some(scene)
        }
        None => None,
    };
    if let Some(p) = &a.suite {
        let suite = TaskSuite::load(p)?;
        for (i, e) in suite.entries.iter().enumerate() {
            match fixtures::scene(&e.scene_id) {
                Some(Ok(_)) => {}
                Some(Err(err)) => return Err(Usage(format!("entry {i}: {err}"))),
                None => return Err(Usage(format!("entry {i}: unknown scene {}", e.scene_id))),
            }
        }
        eprintln!("suite {}: {} entries", p.display(), suite.entries.len());
        checked += 1;
    }
    if let Some(d) = &a.templates {
        Templates::load_dir(d)?;
        eprintln!("templates {}: ok", d.display());
        checked += 1;
    }
    if let Some(p) = &a.plan {
        let plan = planscript::parse(&std::fs::read_to_string(p)?)?;
        eprintln!("plan {}: {} steps", p.display(), plan.invocations.len());
        if let Some(scene) = &scene {
            let trace = skills::execute_plan(scene, &plan, AgentId::Robot);
            if !trace.is_success() {
                eprintln!("plan does not run in {}: {:?}", scene.id, trace.outcome);
                return Ok(ExitCode::from(2));
            }
            eprintln!("plan runs in {}", scene.id);
        }
        checked += 1;
    }
    if checked == 0 {
        return Err(Usage("nothing to check; pass --scene, --suite, --templates or --plan".into()));
    }
    Ok(ExitCode::SUCCESS)
}

