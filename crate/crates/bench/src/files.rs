//! On-disk formats: memory documents, trace files, and prompt journals.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use step_core::action::{parse_command, ActionCommand};
use step_core::backend::JournalEntry;
use step_core::memory::{from_document, to_document, MemoryStore};
use step_core::trace::{EndReason, GateMark, StepRecord, TrialTrace};

/// Writes `contents` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating temp file in {}", dir.display()))?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("replacing {}", path.display()))?;
    Ok(())
}

pub fn save_memory(path: &Path, store: &MemoryStore) -> Result<()> {
    write_atomic(path, to_document(store).as_bytes())
}

/// A missing file is an empty store.
pub fn load_memory(path: &Path, task_id: &str) -> Result<MemoryStore> {
    match fs::read_to_string(path) {
        Ok(text) => Ok(from_document(&text, task_id).with_context(|| format!("loading memory {}", path.display()))?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(MemoryStore::empty(task_id)),
        Err(e) => Err(e).with_context(|| format!("reading memory {}", path.display())),
    }
}

/// First line of a trace file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceHeader {
    pub task_id: String,
    pub variation: u64,
    pub attempt: u32,
    pub budget: u32,
    pub opening: String,
    pub ended_by: Option<EndReason>,
    pub final_reward: i32,
    pub completed_subtasks: Vec<String>,
}

/// One step line of a trace file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceLine {
    pub index: u32,
    pub rationale: String,
    pub action: String,
    pub observation: String,
    pub reward: i32,
    pub verdict: GateMark,
}

impl From<&StepRecord> for TraceLine {
    fn from(s: &StepRecord) -> Self {
        TraceLine {
            index: s.index,
            rationale: s.rationale.clone(),
            action: s.action.raw.clone(),
            observation: s.observation.clone(),
            reward: s.reward,
            verdict: s.gate,
        }
    }
}

impl TraceLine {
    pub fn action(&self) -> Result<ActionCommand> {
        if self.verdict == GateMark::Invalid {
            return Ok(ActionCommand::noop(&self.action));
        }
        parse_command(&self.action).with_context(|| format!("step {}: unparseable action \"{}\"", self.index, self.action))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceFile {
    pub header: TraceHeader,
    pub steps: Vec<TraceLine>,
}

impl TraceFile {
    pub fn new(task_id: &str, variation: u64, opening: &str, trace: &TrialTrace) -> Self {
        TraceFile {
            header: TraceHeader {
                task_id: task_id.to_owned(),
                variation,
                attempt: trace.attempt,
                budget: trace.budget,
                opening: opening.to_owned(),
                ended_by: trace.ended_by,
                final_reward: trace.final_reward,
                completed_subtasks: trace.completed_subtasks.clone(),
            },
            steps: trace.steps.iter().map(TraceLine::from).collect(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for s in &self.steps {
            out.push_str(&serde_json::to_string(s).expect("step serializes"));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().context("trace file is empty")?;
        let header: TraceHeader = serde_json::from_str(first).context("line 1: bad trace header")?;
        let mut steps = Vec::new();
        for (n, line) in lines {
            let step: TraceLine = serde_json::from_str(line).with_context(|| format!("line {}: bad trace step", n + 1))?;
            if step.index as usize != steps.len() + 1 {
                bail!("line {}: step index {} out of sequence", n + 1, step.index);
            }
            steps.push(step);
        }
        Ok(TraceFile { header, steps })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading trace {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing trace {}", path.display()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }

    /// Rebuilds the in-memory trace.
    pub fn to_trace(&self) -> Result<TrialTrace> {
        let mut t = TrialTrace::new(self.header.attempt, self.header.budget);
        for s in &self.steps {
            t.steps.push(StepRecord {
                index: s.index,
                reward: s.reward,
                action: s.action()?,
                observation: s.observation.clone(),
                rationale: s.rationale.clone(),
                gate: s.verdict,
            });
        }
        t.completed_subtasks = self.header.completed_subtasks.clone();
        t.final_reward = self.header.final_reward;
        t.ended_by = self.header.ended_by;
        Ok(t)
    }
}

/// `<out>/<task>/<seed>`.
pub fn run_dir(out: &Path, task_id: &str, variation: u64) -> PathBuf {
    out.join(task_id).join(variation.to_string())
}

pub fn trace_path(dir: &Path, attempt: u32) -> PathBuf {
    dir.join(format!("attempt_{attempt}.trace"))
}

pub const JOURNAL_FILE: &str = "journal.jsonl";

pub fn write_journal(path: &Path, entries: &[JournalEntry]) -> Result<()> {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e)?);
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_journal(path: &Path) -> Result<Vec<JournalEntry>> {
    let file = fs::File::open(path).with_context(|| format!("opening journal {}", path.display()))?;
    let mut entries = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        entries.push(serde_json::from_str(&line).with_context(|| format!("{}:{}: bad journal entry", path.display(), n + 1))?);
    }
    Ok(entries)
}
