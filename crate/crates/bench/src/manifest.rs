//! Run manifests: which tasks to run, against which backend and environment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use step_core::agent::RunConfig;
use step_core::backend::{Role, Script};
use step_core::memory::{from_document, MemoryStore};
use step_core::task::TaskKind;

use crate::fixtures;

/// Prefix selecting a built-in script or memory instead of a file.
pub const BUILTIN_PREFIX: &str = "builtin:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    /// Output directory; `--out` overrides it.
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_attempts")]
    pub attempts: u32,
    #[serde(default = "default_sub_steps")]
    pub max_sub_steps: u32,
    #[serde(default = "default_rejection_cap")]
    pub rejection_cap: u32,
    #[serde(default)]
    pub planner_off: bool,
    #[serde(default)]
    pub evaluator_off: bool,
    pub backend: BackendConfig,
    #[serde(default)]
    pub environment: EnvironmentConfig,
    pub tasks: Vec<TaskEntry>,
}

fn default_attempts() -> u32 {
    RunConfig::default().attempts
}

fn default_sub_steps() -> u32 {
    RunConfig::default().max_sub_steps
}

fn default_rejection_cap() -> u32 {
    RunConfig::default().rejection_cap
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    /// Deterministic responses; tasks may override `script`.
    Scripted {
        #[serde(default)]
        script: Option<String>,
    },
    /// Responses replayed from a prompt journal of an earlier run. The path
    /// may contain `{task}` and `{seed}`.
    Replay {
        journal: String,
        #[serde(default)]
        strict_prompts: bool,
    },
    /// Chat-completion over HTTP.
    Live {
        endpoint: String,
        model: String,
        /// Name of the environment variable holding the API key.
        api_key_env: String,
        #[serde(default)]
        models: BTreeMap<Role, String>,
        #[serde(default = "default_temperature")]
        temperature: f32,
        #[serde(default = "default_max_tokens")]
        max_tokens: u32,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
    },
}

fn default_temperature() -> f32 {
    0.0
}

fn default_max_tokens() -> u32 {
    512
}

fn default_timeout() -> u64 {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvironmentConfig {
    /// The built-in simulator with the bundled worlds plus extra world
    /// files, resolved relative to the manifest.
    Sim {
        #[serde(default)]
        worlds: Vec<PathBuf>,
    },
    /// An external process speaking the line-JSON bridge protocol.
    Bridge { command: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskEntry {
    pub id: String,
    /// Overrides the bundled world's kind; needed for bridge tasks the
    /// bundled library does not define.
    #[serde(default)]
    pub kind: Option<TaskKind>,
    /// Overrides the bundled world's description, as for `kind`.
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub script: Option<String>,
    /// Starting memory: a memory file or `builtin:<name>`.
    #[serde(default)]
    pub memory: Option<String>,
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        EnvironmentConfig::Sim { worlds: Vec::new() }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

impl RunManifest {
    pub fn parse(text: &str) -> Result<Self> {
        let m: RunManifest = toml::from_str(text).context("parsing manifest")?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::parse(&text)?, base))
    }

    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            attempts: self.attempts,
            max_sub_steps: self.max_sub_steps,
            rejection_cap: self.rejection_cap,
            planner_enabled: !self.planner_off,
            evaluator_enabled: !self.evaluator_off,
        }
    }

    /// Everything that can be checked before any task starts.
    pub fn validate(&self) -> Result<()> {
        self.run_config().validate()?;
        if self.tasks.is_empty() {
            bail!("manifest lists no tasks");
        }
        let mut seen = std::collections::BTreeSet::new();
        for t in &self.tasks {
            if t.seeds.is_empty() {
                bail!("task {} has no seeds", t.id);
            }
            for s in &t.seeds {
                if !seen.insert((t.id.as_str(), *s)) {
                    bail!("task {} seed {s} is listed twice", t.id);
                }
            }
        }
        match &self.backend {
            BackendConfig::Scripted { script } => {
                for t in &self.tasks {
                    if t.script.is_none() && script.is_none() {
                        bail!("scripted backend needs a script for task {}", t.id);
                    }
                }
            }
            BackendConfig::Replay { journal, .. } => {
                if journal.trim().is_empty() {
                    bail!("replay backend needs a journal path");
                }
            }
            BackendConfig::Live { endpoint, model, api_key_env, temperature, max_tokens, .. } => {
                if !(endpoint.starts_with("http://") || endpoint.starts_with("https://")) {
                    bail!("live backend endpoint must be an http(s) URL, got \"{endpoint}\"");
                }
                if model.trim().is_empty() {
                    bail!("live backend needs a model name");
                }
                if api_key_env.trim().is_empty() {
                    bail!("live backend needs api_key_env");
                }
                if !(0.0..=2.0).contains(temperature) {
                    bail!("live backend temperature {temperature} is outside 0..=2");
                }
                if *max_tokens == 0 {
                    bail!("live backend max_tokens must be at least 1");
                }
            }
        }
        if let EnvironmentConfig::Bridge { command } = &self.environment {
            if command.is_empty() {
                bail!("bridge environment needs a command");
            }
        }
        Ok(())
    }
}

/// Reads `builtin:<name>` or a JSON script file.
pub fn resolve_script(reference: &str, base: &Path) -> Result<Script> {
    if let Some(name) = reference.strip_prefix(BUILTIN_PREFIX) {
        return fixtures::script(name).with_context(|| format!("unknown built-in script \"{name}\" (known: {})", fixtures::SCRIPTS.join(", ")));
    }
    let path = base.join(reference);
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading script {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing script {}", path.display()))
}

/// Reads `builtin:<name>` or a memory document.
pub fn resolve_memory(reference: &str, base: &Path, task_id: &str) -> Result<MemoryStore> {
    if let Some(name) = reference.strip_prefix(BUILTIN_PREFIX) {
        let m = fixtures::memory(name).with_context(|| format!("unknown built-in memory \"{name}\" (known: {})", fixtures::MEMORIES.join(", ")))?;
        if m.task_id != task_id {
            bail!("built-in memory \"{name}\" is for task {}, not {task_id}", m.task_id);
        }
        return Ok(m);
    }
    let path = base.join(reference);
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading memory {}", path.display()))?;
    from_document(&text, task_id).with_context(|| format!("loading memory {}", path.display()))
}
