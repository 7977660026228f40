//! `run`: executes every (task, seed) of a manifest and writes its artifacts.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use step_core::action::ActionVerb;
use step_core::agent::{Agent, AttemptResult, AttemptStatus, RunConfig};
use step_core::backend::{CompletionBackend, Journaled, ReplayBackend, ScriptedBackend};
use step_core::env::Environment;
use step_core::memory::MemoryStore;
use step_core::task::{TaskKind, TaskSpec};
use step_core::template::TemplateSet;
use step_core::trace::{EndReason, TrialTrace};
use step_core::world::{TextWorld, WorldDef};

use crate::bridge::BridgeEnv;
use crate::files::{self, TraceFile, JOURNAL_FILE};
use crate::live::{HttpTransport, LiveBackend, LiveSettings};
use crate::manifest::{resolve_memory, resolve_script, BackendConfig, EnvironmentConfig, RunManifest, TaskEntry};
use crate::worlds;

pub const RESULTS_FILE: &str = "results.json";
pub const MEMORY_FILE: &str = "memory.json";
pub const WIRE_FILE: &str = "wire.jsonl";
const LIVE_BACKOFF: Duration = Duration::from_millis(500);

/// Summary written to `<out>/results.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunResults {
    pub config: RunConfig,
    pub runs: Vec<RunRecord>,
    /// Runs that stopped with a fatal error.
    #[serde(default)]
    pub failures: Vec<RunFailure>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub task_id: String,
    pub kind: TaskKind,
    pub variation: u64,
    /// Best episode score over attempts that were not aborted.
    pub best_score: i32,
    pub attempts: Vec<AttemptSummary>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptSummary {
    pub attempt: u32,
    pub episode_score: i32,
    pub steps: u32,
    pub ended_by: Option<EndReason>,
    #[serde(flatten)]
    pub status: AttemptStatus,
    /// Completed by a single focus with no earlier progress; review by hand.
    #[serde(default)]
    pub suspect: bool,
    /// Trace file, relative to the output directory.
    pub trace: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunFailure {
    pub task_id: String,
    pub kind: TaskKind,
    pub variation: u64,
    pub error: String,
}

/// Completion where the only score gain is the final focus step. The
/// episode reached the goal without any earlier subgoal.
pub fn suspect_completion(trace: &TrialTrace) -> bool {
    let Some(last) = trace.steps.last() else {
        return false;
    };
    trace.ended_by == Some(EndReason::TaskComplete) && last.action.verb == ActionVerb::FocusOn && trace.rewarded_steps() == [last.index]
}

impl RunResults {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Everything one (task, seed) job needs, resolved before any job starts.
struct Job {
    spec: TaskSpec,
    memory: MemoryStore,
    backend: BackendSource,
}

enum BackendSource {
    Scripted(step_core::backend::Script),
    Replay { entries: Vec<step_core::backend::JournalEntry>, strict: bool },
    Live(LiveSettings, Duration),
}

enum EnvSource {
    Sim(TextWorld),
    Bridge(Vec<String>),
}

impl EnvSource {
    fn open(&self) -> Result<Box<dyn Environment + Send>> {
        Ok(match self {
            EnvSource::Sim(world) => Box::new(world.clone()),
            EnvSource::Bridge(command) => Box::new(BridgeEnv::spawn(command).with_context(|| format!("starting bridge {:?}", command))?),
        })
    }
}

fn task_spec(entry: &TaskEntry, seed: u64, library: &[WorldDef]) -> Result<TaskSpec> {
    let def = library.iter().find(|d| d.task_id == entry.id);
    let kind = entry.kind.or(def.map(|d| d.budget_kind));
    let description = entry.description.clone().or(def.map(|d| d.description.clone()));
    match (kind, description) {
        (Some(kind), Some(description)) => Ok(TaskSpec { task_id: entry.id.clone(), description, kind, variation_seed: seed }),
        _ => bail!("task {} is not in the world library; give kind and description in the manifest", entry.id),
    }
}

fn prepare(manifest: &RunManifest, base: &Path) -> Result<(EnvSource, Vec<Job>)> {
    let (env, library) = match &manifest.environment {
        EnvironmentConfig::Sim { worlds: extra } => {
            let paths: Vec<PathBuf> = extra.iter().map(|p| base.join(p)).collect();
            let library = worlds::library(&paths)?;
            (EnvSource::Sim(TextWorld::new(library.clone())), library)
        }
        EnvironmentConfig::Bridge { command } => (EnvSource::Bridge(command.clone()), worlds::bundled()?),
    };
    if let EnvSource::Sim(world) = &env {
        for t in &manifest.tasks {
            if world.def(&t.id).is_none() {
                bail!("task {} is not in the world library", t.id);
            }
        }
    }
    let mut jobs = Vec::new();
    for entry in &manifest.tasks {
        for &seed in &entry.seeds {
            let spec = task_spec(entry, seed, &library)?;
            let memory = match &entry.memory {
                Some(r) => resolve_memory(r, base, &entry.id)?,
                None => MemoryStore::empty(&entry.id),
            };
            let backend = match &manifest.backend {
                BackendConfig::Scripted { script } => {
                    let reference = entry.script.as_ref().or(script.as_ref()).expect("validated");
                    BackendSource::Scripted(resolve_script(reference, base)?)
                }
                BackendConfig::Replay { journal, strict_prompts } => {
                    let path = base.join(journal.replace("{task}", &entry.id).replace("{seed}", &seed.to_string()));
                    BackendSource::Replay { entries: files::read_journal(&path)?, strict: *strict_prompts }
                }
                BackendConfig::Live { endpoint, model, api_key_env, models, temperature, max_tokens, timeout_secs } => {
                    let api_key = std::env::var(api_key_env).with_context(|| format!("environment variable {api_key_env} is not set"))?;
                    BackendSource::Live(
                        LiveSettings {
                            endpoint: endpoint.clone(),
                            model: model.clone(),
                            api_key,
                            models: models.clone(),
                            temperature: *temperature,
                            max_tokens: *max_tokens,
                            backoff: LIVE_BACKOFF,
                        },
                        Duration::from_secs(*timeout_secs),
                    )
                }
            };
            jobs.push(Job { spec, memory, backend });
        }
    }
    Ok((env, jobs))
}

fn write_attempt(dir: &Path, spec: &TaskSpec, result: &AttemptResult) -> Result<()> {
    TraceFile::new(&spec.task_id, spec.variation_seed, &result.opening, &result.trace).write(&files::trace_path(dir, result.attempt))?;
    files::save_memory(&dir.join(format!("memory_{}.json", result.attempt)), &result.memory_after)
}

fn run_job(config: &RunConfig, env: &EnvSource, job: Job, out: &Path) -> Result<RunRecord> {
    let spec = &job.spec;
    let dir = files::run_dir(out, &spec.task_id, spec.variation_seed);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut environment = env.open()?;
    let templates = TemplateSet::builtin();
    let mut live = None;
    let inner: Box<dyn CompletionBackend> = match job.backend {
        BackendSource::Scripted(script) => Box::new(ScriptedBackend::new(script)),
        BackendSource::Replay { entries, strict } => Box::new(ReplayBackend::new(entries, strict)),
        BackendSource::Live(settings, timeout) => {
            let backend = LiveBackend::new(HttpTransport::new(timeout)?, settings);
            live = Some(std::sync::Arc::new(std::sync::Mutex::new(backend)));
            Box::new(SharedLive(live.clone().expect("just set")))
        }
    };
    let mut backend = Journaled::new(inner);
    let mut memory = job.memory;
    if memory.task_id != spec.task_id {
        bail!("memory belongs to task {}, not {}", memory.task_id, spec.task_id);
    }
    let mut attempts = Vec::new();
    let mut failure = None;
    for k in 1..=config.attempts {
        let outcome = Agent::new(&mut backend, &templates, *config)?.run_attempt(&mut *environment, spec, &memory, k);
        match outcome {
            Ok(result) => {
                write_attempt(&dir, spec, &result)?;
                memory = result.memory_after.clone();
                files::save_memory(&dir.join(MEMORY_FILE), &memory)?;
                attempts.push(AttemptSummary {
                    attempt: k,
                    episode_score: result.episode_score,
                    steps: result.trace.len(),
                    ended_by: result.trace.ended_by,
                    status: result.status.clone(),
                    suspect: suspect_completion(&result.trace),
                    trace: files::trace_path(&dir, k).strip_prefix(out).expect("under out").to_path_buf(),
                });
                log::info!("{} seed {} attempt {k}: score {}", spec.task_id, spec.variation_seed, result.episode_score);
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
        files::write_journal(&dir.join(JOURNAL_FILE), backend.entries())?;
    }
    files::write_journal(&dir.join(JOURNAL_FILE), backend.entries())?;
    if let Some(live) = live {
        let wire = live.lock().expect("live backend lock").take_wire();
        let mut text = String::new();
        for w in wire {
            text.push_str(&serde_json::to_string(&w)?);
            text.push('\n');
        }
        files::write_atomic(&dir.join(WIRE_FILE), text.as_bytes())?;
    }
    if let Some(e) = failure {
        bail!("{} seed {}: {e}", spec.task_id, spec.variation_seed);
    }
    let best_score = attempts.iter().filter(|a| a.status == AttemptStatus::Completed).map(|a| a.episode_score).max().unwrap_or(0);
    Ok(RunRecord { task_id: spec.task_id.clone(), kind: spec.kind, variation: spec.variation_seed, best_score, attempts })
}

/// Lets the wire log be read back after the journal wrapper is done.
struct SharedLive(std::sync::Arc<std::sync::Mutex<LiveBackend<HttpTransport>>>);

impl CompletionBackend for SharedLive {
    fn complete(&mut self, request: &step_core::backend::CompletionRequest) -> Result<String, step_core::backend::BackendError> {
        self.0.lock().expect("live backend lock").complete(request)
    }
}

/// Runs all jobs of the manifest, in parallel across (task, seed) pairs.
///
/// `results.json` is written even when some runs fail; the error lists them.
pub fn cmd_run(manifest: &RunManifest, base: &Path, out: &Path) -> Result<RunResults> {
    manifest.validate()?;
    let config = manifest.run_config();
    let (env, jobs) = prepare(manifest, base)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let keys: Vec<(String, TaskKind, u64)> = jobs.iter().map(|j| (j.spec.task_id.clone(), j.spec.kind, j.spec.variation_seed)).collect();
    let outcomes: Vec<Result<RunRecord>> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .into_iter()
            .map(|job| {
                let (config, env) = (&config, &env);
                scope.spawn(move || run_job(config, env, job, out))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|_| Err(anyhow::anyhow!("run thread panicked")))).collect()
    });
    let mut results = RunResults { config, runs: Vec::new(), failures: Vec::new() };
    for ((task_id, kind, variation), outcome) in keys.into_iter().zip(outcomes) {
        match outcome {
            Ok(record) => results.runs.push(record),
            Err(e) => {
                log::error!("{e:#}");
                results.failures.push(RunFailure { task_id, kind, variation, error: format!("{e:#}") });
            }
        }
    }
    files::write_atomic(&out.join(RESULTS_FILE), serde_json::to_string_pretty(&results)?.as_bytes())?;
    if !results.failures.is_empty() {
        let names: Vec<String> = results.failures.iter().map(|f| format!("{} seed {}", f.task_id, f.variation)).collect();
        bail!("{} run(s) failed: {}", names.len(), names.join(", "));
    }
    Ok(results)
}
