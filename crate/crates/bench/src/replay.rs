//! `replay`: re-executes a trace against the simulator and checks that every
//! executed step is paired with the Evaluator verdict it claims.

use std::fmt;
use std::path::Path;

use anyhow::{Context, Result};
use step_core::backend::{JournalEntry, Role};
use step_core::env::Environment;
use step_core::evaluator::parse_verdict;
use step_core::prompting::NO_RULES;
use step_core::trace::{GateMark, TrialTrace, INVALID_ACTION_OBSERVATION};
use step_core::world::TextWorld;

use crate::files::{TraceFile, TraceLine};

/// First point where the replay disagrees with the recording. Index 0 is
/// the opening observation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    pub index: u32,
    pub field: &'static str,
    pub recorded: String,
    pub replayed: String,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {}: {} differs\n  recorded: {:?}\n  replayed: {:?}", self.index, self.field, self.recorded, self.replayed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReplayReport {
    pub steps_checked: u32,
    pub divergence: Option<Divergence>,
    /// Steps whose gate annotation does not match the verdicts on record.
    pub pairing_problems: Vec<String>,
}

impl ReplayReport {
    pub fn is_valid(&self) -> bool {
        self.divergence.is_none() && self.pairing_problems.is_empty()
    }
}

impl fmt::Display for ReplayReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.divergence {
            None => writeln!(f, "replayed {} steps: observations and scores match", self.steps_checked)?,
            Some(d) => writeln!(f, "divergence at {d}")?,
        }
        for p in &self.pairing_problems {
            writeln!(f, "pairing: {p}")?;
        }
        write!(f, "{}", if self.is_valid() { "valid" } else { "INVALID" })
    }
}

fn diverge(index: u32, field: &'static str, recorded: impl fmt::Debug, replayed: impl fmt::Debug) -> Divergence {
    let show = |v: &dyn fmt::Debug| {
        let s = format!("{v:?}");
        s.strip_prefix('"').and_then(|s| s.strip_suffix('"')).map(str::to_owned).unwrap_or(s)
    };
    Divergence { index, field, recorded: show(&recorded), replayed: show(&replayed) }
}

/// Re-runs the recorded actions from a fresh reset of `task_id` at `seed`.
pub fn reexecute(world: &mut TextWorld, trace: &TraceFile, task_id: &str, seed: u64) -> Result<(u32, Option<Divergence>)> {
    let opening = world.reset(task_id, seed).with_context(|| format!("resetting {task_id}"))?;
    if opening != trace.header.opening {
        return Ok((0, Some(diverge(0, "opening observation", &trace.header.opening, &opening))));
    }
    let mut rebuilt = TrialTrace::new(trace.header.attempt, trace.header.budget);
    let mut checked = 0;
    for step in &trace.steps {
        let action = step.action()?;
        if step.verdict == GateMark::Invalid {
            if step.observation != INVALID_ACTION_OBSERVATION {
                return Ok((checked, Some(diverge(step.index, "observation", &step.observation, INVALID_ACTION_OBSERVATION))));
            }
            rebuilt.record_invalid(&step.action, step.rationale.clone())?;
        } else {
            let outcome = match world.step(&action) {
                Ok(o) => o,
                Err(e) => return Ok((checked, Some(diverge(step.index, "environment response", "a step outcome", e.to_string())))),
            };
            if outcome.observation != step.observation {
                return Ok((checked, Some(diverge(step.index, "observation", &step.observation, &outcome.observation))));
            }
            rebuilt.record_step(&outcome, action, step.rationale.clone(), step.verdict)?;
        }
        let replayed = rebuilt.steps.last().expect("just recorded");
        if replayed.reward != step.reward {
            return Ok((checked, Some(diverge(step.index, "score", step.reward, replayed.reward))));
        }
        checked += 1;
        if rebuilt.is_ended() && (step.index as usize) < trace.steps.len() {
            return Ok((checked, Some(diverge(step.index, "episode end", "episode continues", format!("{:?}", rebuilt.ended_by)))));
        }
    }
    let last = trace.steps.len() as u32;
    if rebuilt.ended_by != trace.header.ended_by {
        return Ok((checked, Some(diverge(last, "ended_by", trace.header.ended_by, rebuilt.ended_by))));
    }
    if rebuilt.final_reward != trace.header.final_reward {
        return Ok((checked, Some(diverge(last, "final reward", trace.header.final_reward, rebuilt.final_reward))));
    }
    Ok((checked, None))
}

/// Structural checks on gate annotations: verdict ids strictly increase and
/// evaluator-off traces carry no verdicts.
pub fn check_annotations(steps: &[TraceLine]) -> Vec<String> {
    let mut problems = Vec::new();
    let mut last_verdict = 0;
    let bypassed = steps.iter().any(|s| s.verdict == GateMark::Bypassed);
    for s in steps {
        let Some(v) = s.verdict.verdict_id() else { continue };
        if bypassed {
            problems.push(format!("step {} carries verdict {v} in a trace with bypassed steps", s.index));
        }
        if v <= last_verdict {
            problems.push(format!("step {} reuses or reorders verdict {v} (previous {last_verdict})", s.index));
        }
        last_verdict = v;
    }
    problems
}

/// What one Evaluator verdict decided, reconstructed from the journal.
#[derive(Debug, Clone, PartialEq, Eq)]
struct JournalVerdict {
    approved: bool,
    fail_open: bool,
    prompt: String,
}

/// Groups the attempt's Evaluator calls into verdicts: one call, or two when
/// the first answer was unusable.
fn journal_verdicts(journal: &[JournalEntry], attempt: u32) -> Vec<JournalVerdict> {
    let calls: Vec<&JournalEntry> = journal.iter().filter(|e| e.role == Role::Evaluator && e.attempt == attempt).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < calls.len() {
        let first = calls[i];
        if first.error.is_some() {
            break;
        }
        let decide = |e: &JournalEntry| parse_verdict(&e.response).ok().map(|v| v.approve || e.prompt.contains(NO_RULES));
        match decide(first) {
            Some(approved) => {
                out.push(JournalVerdict { approved, fail_open: false, prompt: first.prompt.clone() });
                i += 1;
            }
            None => {
                let retry = calls.get(i + 1).filter(|e| e.error.is_none());
                let Some(retry) = retry else { break };
                let (approved, fail_open) = match decide(retry) {
                    Some(a) => (a, false),
                    None => (true, true),
                };
                out.push(JournalVerdict { approved, fail_open, prompt: first.prompt.clone() });
                i += 2;
            }
        }
    }
    out
}

/// Checks each annotated step against the verdict the journal recorded.
pub fn check_pairing(steps: &[TraceLine], journal: &[JournalEntry], attempt: u32) -> Vec<String> {
    let verdicts = journal_verdicts(journal, attempt);
    let mut problems = Vec::new();
    for s in steps {
        let Some(v) = s.verdict.verdict_id() else { continue };
        let Some(j) = verdicts.get(v as usize - 1) else {
            problems.push(format!("step {} cites verdict {v}, but the journal has {} verdicts", s.index, verdicts.len()));
            continue;
        };
        let consistent = match s.verdict {
            GateMark::Approved { .. } => j.approved && !j.fail_open,
            GateMark::FailOpen { .. } => j.fail_open,
            GateMark::ForceExecute { .. } => !j.approved,
            GateMark::Bypassed | GateMark::Invalid => true,
        };
        if !consistent {
            let recorded = if j.fail_open {
                "unusable"
            } else if j.approved {
                "approve"
            } else {
                "reject"
            };
            problems.push(format!("step {} is marked {:?} but verdict {v} was {recorded}", s.index, s.verdict));
        }
        if !j.prompt.contains(&s.action) {
            problems.push(format!("step {} action \"{}\" is not the candidate verdict {v} judged", s.index, s.action));
        }
    }
    problems
}

/// Replays a trace file. The task and seed default to the header's; a
/// journal next to the trace is used for the pairing check when present.
pub fn cmd_replay(trace_path: &Path, world: &mut TextWorld, task: Option<&str>, seed: Option<u64>, journal: Option<&[JournalEntry]>) -> Result<ReplayReport> {
    let trace = TraceFile::read(trace_path)?;
    let task_id = task.unwrap_or(&trace.header.task_id).to_owned();
    let seed = seed.unwrap_or(trace.header.variation);
    let (steps_checked, divergence) = reexecute(world, &trace, &task_id, seed)?;
    let mut pairing_problems = check_annotations(&trace.steps);
    if let Some(journal) = journal {
        pairing_problems.extend(check_pairing(&trace.steps, journal, trace.header.attempt));
    }
    Ok(ReplayReport { steps_checked, divergence, pairing_problems })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::files::{read_journal, trace_path, JOURNAL_FILE};
    use crate::manifest::RunManifest;
    use crate::run::cmd_run;

    fn golden_run() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        cmd_run(&RunManifest::parse(crate::fixtures::MANIFESTS[0].1).unwrap(), Path::new("."), dir.path()).unwrap();
        dir
    }

    fn world() -> TextWorld {
        TextWorld::new(crate::worlds::bundled().unwrap())
    }

    #[test]
    fn golden_traces_replay_cleanly_with_pairing() {
        let dir = golden_run();
        let seed_dir = dir.path().join("temp-measure/0");
        let journal = read_journal(&seed_dir.join(JOURNAL_FILE)).unwrap();
        for k in 1..=5 {
            let report = cmd_replay(&trace_path(&seed_dir, k), &mut world(), None, None, Some(&journal)).unwrap();
            assert!(report.is_valid(), "attempt {k}: {report}");
        }
    }

    #[test]
    fn edited_observation_diverges_at_that_step() {
        let dir = golden_run();
        let path = trace_path(&dir.path().join("temp-measure/0"), 2);
        let mut trace = TraceFile::read(&path).unwrap();
        trace.steps[4].observation.push_str(" (edited)");
        trace.write(&path).unwrap();
        let report = cmd_replay(&path, &mut world(), None, None, None).unwrap();
        assert_eq!(report.divergence.as_ref().unwrap().index, 5);
        assert_eq!(report.steps_checked, 4);
        assert!(!report.is_valid());
    }

    #[test]
    fn mislabelled_gate_fails_pairing() {
        let dir = golden_run();
        let seed_dir = dir.path().join("temp-measure/0");
        let journal = read_journal(&seed_dir.join(JOURNAL_FILE)).unwrap();
        let path = trace_path(&seed_dir, 2);
        let mut trace = TraceFile::read(&path).unwrap();
        let v = trace.steps[0].verdict.verdict_id().unwrap();
        trace.steps[0].verdict = GateMark::ForceExecute { verdict: v };
        trace.write(&path).unwrap();
        let report = cmd_replay(&path, &mut world(), None, None, Some(&journal)).unwrap();
        assert!(report.divergence.is_none());
        assert!(report.pairing_problems.iter().any(|p| p.contains("step 1")), "{report}");
    }

    #[test]
    fn annotations_must_increase() {
        let line = |index, verdict| TraceLine { index, rationale: String::new(), action: "wait".into(), observation: String::new(), reward: 0, verdict };
        let steps = [line(1, GateMark::Approved { verdict: 2 }), line(2, GateMark::Approved { verdict: 2 })];
        assert_eq!(check_annotations(&steps).len(), 1);
        let steps = [line(1, GateMark::Bypassed), line(2, GateMark::Approved { verdict: 1 })];
        assert_eq!(check_annotations(&steps).len(), 1);
    }
}
