//! The orchestrator: runs trials of one task with the Planner, Executor,
//! Evaluator, and Memory-Generator, carrying memory across attempts.

use alloc::borrow::ToOwned;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::backend::{CompletionBackend, Coordinates};
use crate::env::{EnvError, Environment};
use crate::evaluator::{deliberation_gate, evaluate_candidate, GateDecision};
use crate::executor::{generate_action, ExecutorView, Feedback};
use crate::memory::{extract_negative_rules, generate_memory, MemoryStore, NegativeRule};
use crate::planner::{propose_subtask, refine_subtask, PlanDirective, PlannerInput};
use crate::prompting::{RoleCtx, RoleError};
use crate::task::TaskSpec;
use crate::template::TemplateSet;
use crate::trace::{GateMark, TraceError, TrialTrace};

/// Loop limits and ablation switches for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Trials per task.
    pub attempts: u32,
    /// Steps the Executor may take on one subtask before the Planner refines it.
    pub max_sub_steps: u32,
    /// Consecutive rejections after which the latest candidate runs anyway.
    pub rejection_cap: u32,
    pub planner_enabled: bool,
    pub evaluator_enabled: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { attempts: 5, max_sub_steps: 8, rejection_cap: 3, planner_enabled: true, evaluator_enabled: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("run configuration field `{0}` must be at least 1")]
pub struct ConfigError(pub &'static str);

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, value) in [("attempts", self.attempts), ("max_sub_steps", self.max_sub_steps), ("rejection_cap", self.rejection_cap)] {
            if value == 0 {
                return Err(ConfigError(name));
            }
        }
        Ok(())
    }
}

/// Failures that stop a whole task run.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("environment failure: {0}")]
    Env(#[from] EnvError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("memory belongs to task \"{found}\", not \"{expected}\"")]
    MemoryMismatch { expected: String, found: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AttemptStatus {
    Completed,
    /// A role could not produce a usable answer. Memory was left unchanged
    /// and the score does not count.
    Aborted {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptResult {
    pub attempt: u32,
    /// The environment's opening text.
    pub opening: String,
    pub trace: TrialTrace,
    pub memory_after: MemoryStore,
    pub episode_score: i32,
    pub status: AttemptStatus,
    pub warnings: Vec<String>,
}

impl AttemptResult {
    pub fn counts(&self) -> bool {
        self.status == AttemptStatus::Completed
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task_id: String,
    pub variation: u64,
    pub attempts: Vec<AttemptResult>,
    /// Best episode score over attempts that were not aborted.
    pub best_score: i32,
    pub final_memory: MemoryStore,
}

enum Stop {
    Abort(RoleError),
    Fatal(RunError),
}

impl From<RoleError> for Stop {
    fn from(e: RoleError) -> Self {
        Stop::Abort(e)
    }
}

impl From<EnvError> for Stop {
    fn from(e: EnvError) -> Self {
        Stop::Fatal(e.into())
    }
}

impl From<TraceError> for Stop {
    fn from(e: TraceError) -> Self {
        Stop::Fatal(e.into())
    }
}

/// Drives trials against one backend and template set.
pub struct Agent<'a> {
    backend: &'a mut dyn CompletionBackend,
    templates: &'a TemplateSet,
    config: RunConfig,
}

impl<'a> Agent<'a> {
    pub fn new(backend: &'a mut dyn CompletionBackend, templates: &'a TemplateSet, config: RunConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(Agent { backend, templates, config })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    /// Runs `config.attempts` trials, feeding each trial's memory into the next.
    pub fn run_task<E: Environment + ?Sized>(&mut self, env: &mut E, task: &TaskSpec, initial_memory: MemoryStore) -> Result<TaskResult, RunError> {
        if initial_memory.task_id != task.task_id {
            return Err(RunError::MemoryMismatch { expected: task.task_id.clone(), found: initial_memory.task_id });
        }
        let mut memory = initial_memory;
        let mut attempts = Vec::new();
        for k in 1..=self.config.attempts {
            let result = self.run_attempt(env, task, &memory, k)?;
            memory = result.memory_after.clone();
            attempts.push(result);
        }
        let best_score = attempts.iter().filter(|a| a.counts()).map(|a| a.episode_score).max().unwrap_or(0);
        Ok(TaskResult { task_id: task.task_id.clone(), variation: task.variation_seed, attempts, best_score, final_memory: memory })
    }

    /// One trial followed by memory generation.
    pub fn run_attempt<E: Environment + ?Sized>(
        &mut self,
        env: &mut E,
        task: &TaskSpec,
        memory: &MemoryStore,
        attempt: u32,
    ) -> Result<AttemptResult, RunError> {
        let opening = env.reset(&task.task_id, task.variation_seed)?;
        let rules = extract_negative_rules(memory);
        let mut trace = TrialTrace::new(attempt, task.budget());
        let mut ctx = RoleCtx { backend: &mut *self.backend, templates: self.templates, coords: Coordinates { attempt, step: 1 } };
        let played = play(&self.config, &mut ctx, env, task, memory, &rules, &mut trace);
        trace.close();
        let episode_score = trace.final_reward;
        let abort = match played {
            Ok(()) => None,
            Err(Stop::Fatal(e)) => return Err(e),
            Err(Stop::Abort(e)) => Some(e),
        };
        let (memory_after, status, warnings) = match abort {
            Some(e) => {
                log::warn!("attempt {attempt} of {} aborted: {e}", task.task_id);
                (memory.clone(), AttemptStatus::Aborted { reason: alloc::format!("{e}") }, Vec::new())
            }
            None => {
                ctx.coords = Coordinates { attempt, step: trace.len() };
                match generate_memory(&mut ctx, task, memory, &trace) {
                    Ok(update) => (update.store, AttemptStatus::Completed, update.warnings),
                    Err(e) => {
                        log::warn!("memory generation after attempt {attempt} of {} failed: {e}", task.task_id);
                        (memory.clone(), AttemptStatus::Aborted { reason: alloc::format!("{e}") }, Vec::new())
                    }
                }
            }
        };
        Ok(AttemptResult { attempt, opening, trace, memory_after, episode_score, status, warnings })
    }
}

fn play<E: Environment + ?Sized>(
    config: &RunConfig,
    ctx: &mut RoleCtx<'_>,
    env: &mut E,
    task: &TaskSpec,
    memory: &MemoryStore,
    rules: &[NegativeRule],
    trace: &mut TrialTrace,
) -> Result<(), Stop> {
    let attempt = trace.attempt;
    let budget = trace.budget;
    let mut directive: Option<PlanDirective> = None;
    let mut done = false;
    let mut verdicts = 0u32;

    while trace.len() < budget && !trace.is_ended() {
        if config.planner_enabled {
            ctx.coords = Coordinates { attempt, step: trace.len() + 1 };
            if done {
                if let Some(d) = &directive {
                    trace.push_completed(d.subtask.clone());
                }
            }
            let input = PlannerInput { task, strategy: memory.strategy.as_ref(), insights: &memory.insights, history: &trace.steps };
            let next = match &directive {
                Some(d) if !done => refine_subtask(ctx, &input, d)?,
                Some(d) => propose_subtask(ctx, &input, &trace.completed_subtasks, d.planner_step + 1)?,
                None => propose_subtask(ctx, &input, &trace.completed_subtasks, 1)?,
            };
            directive = Some(next);
        }
        done = false;
        let t0 = trace.len();

        while !trace.is_ended() && trace.len() < t0 + config.max_sub_steps && !done {
            let mut feedback: Option<Feedback> = None;
            let mut rejections = 0u32;
            loop {
                ctx.coords = Coordinates { attempt, step: trace.len() + 1 };
                let view = match &directive {
                    Some(d) => ExecutorView::Directed(d),
                    None => ExecutorView::Undirected { task: &task.description, insights: &memory.insights },
                };
                let (rationale, action) = match generate_action(ctx, &view, &trace.steps, feedback.as_ref()) {
                    Ok(pair) => pair,
                    Err(RoleError::Malformed { detail, .. }) => {
                        rejections += 1;
                        if deliberation_gate(rejections, config.rejection_cap) == GateDecision::ForceExecute {
                            trace.record_invalid("", detail)?;
                            break;
                        }
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                };
                if !config.evaluator_enabled {
                    let outcome = env.step(&action)?;
                    trace.record_step(&outcome, action, rationale, GateMark::Bypassed)?;
                    break;
                }
                verdicts += 1;
                let subtask = directive.as_ref().map_or(task.description.as_str(), |d| d.subtask.as_str());
                let verdict = evaluate_candidate(ctx, subtask, rules, &action, &trace.steps)?;
                if verdict.approved {
                    let gate = if verdict.fail_open { GateMark::FailOpen { verdict: verdicts } } else { GateMark::Approved { verdict: verdicts } };
                    let outcome = env.step(&action)?;
                    trace.record_step(&outcome, action, rationale, gate)?;
                    done = config.planner_enabled && verdict.subtask_done;
                    break;
                }
                rejections += 1;
                if deliberation_gate(rejections, config.rejection_cap) == GateDecision::ForceExecute {
                    log::info!("deliberation cap reached; executing \"{}\" despite rejection", action.raw);
                    let outcome = env.step(&action)?;
                    trace.record_step(&outcome, action, rationale, GateMark::ForceExecute { verdict: verdicts })?;
                    break;
                }
                feedback = verdict.feedback;
            }
        }
    }
    if done {
        if let Some(d) = &directive {
            trace.push_completed(d.subtask.to_owned());
        }
    }
    Ok(())
}
