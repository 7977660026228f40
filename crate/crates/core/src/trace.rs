//! Trial traces: the append-only record of one episode.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::action::ActionCommand;
use crate::env::StepOutcome;

/// Observation recorded for a step whose action never parsed.
pub const INVALID_ACTION_OBSERVATION: &str = "invalid action";

/// How the Evaluator gate let a step through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GateMark {
    /// The Evaluator approved the candidate.
    Approved { verdict: u32 },
    /// The Evaluator malfunctioned twice and the candidate went through unchecked.
    FailOpen { verdict: u32 },
    /// Deliberation cap reached; the last rejected candidate executed anyway.
    ForceExecute { verdict: u32 },
    /// Evaluator disabled by ablation.
    Bypassed,
    /// No parseable action; a no-op was recorded without touching the environment.
    Invalid,
}

impl GateMark {
    pub fn verdict_id(self) -> Option<u32> {
        match self {
            GateMark::Approved { verdict } | GateMark::FailOpen { verdict } | GateMark::ForceExecute { verdict } => Some(verdict),
            GateMark::Bypassed | GateMark::Invalid => None,
        }
    }

    /// Whether the action was sent to the environment.
    pub fn executed(self) -> bool {
        !matches!(self, GateMark::Invalid)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: u32,
    /// Cumulative environment score after the step.
    pub reward: i32,
    pub action: ActionCommand,
    pub observation: String,
    pub rationale: String,
    pub gate: GateMark,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EndReason {
    TaskComplete,
    BudgetExhausted,
    FatalPenalty,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("trace already ended ({0:?}); cannot append step")]
    Ended(EndReason),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialTrace {
    pub attempt: u32,
    pub budget: u32,
    pub steps: Vec<StepRecord>,
    pub completed_subtasks: Vec<String>,
    pub final_reward: i32,
    pub ended_by: Option<EndReason>,
}

impl TrialTrace {
    pub fn new(attempt: u32, budget: u32) -> Self {
        TrialTrace { attempt, budget, steps: Vec::new(), completed_subtasks: Vec::new(), final_reward: 0, ended_by: None }
    }

    pub fn len(&self) -> u32 {
        self.steps.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn is_ended(&self) -> bool {
        self.ended_by.is_some()
    }

    /// Cumulative score after the most recent step.
    pub fn current_reward(&self) -> i32 {
        self.steps.last().map_or(0, |s| s.reward)
    }

    /// Appends the environment's response to `action` as the next step.
    pub fn record_step(&mut self, outcome: &StepOutcome, action: ActionCommand, rationale: String, gate: GateMark) -> Result<&StepRecord, TraceError> {
        if let Some(reason) = self.ended_by {
            return Err(TraceError::Ended(reason));
        }
        let before = self.best_before_fatal();
        self.steps.push(StepRecord { index: self.len() + 1, reward: outcome.score, action, observation: outcome.observation.clone(), rationale, gate });
        if outcome.fatal {
            self.ended_by = Some(EndReason::FatalPenalty);
            self.final_reward = before;
        } else {
            self.final_reward = outcome.score.max(0);
            if outcome.terminal {
                self.ended_by = Some(EndReason::TaskComplete);
            } else if self.len() >= self.budget {
                self.ended_by = Some(EndReason::BudgetExhausted);
            }
        }
        Ok(self.steps.last().expect("just pushed"))
    }

    /// Records a no-op step for an action that never parsed.
    pub fn record_invalid(&mut self, raw: &str, rationale: String) -> Result<&StepRecord, TraceError> {
        let outcome = StepOutcome { observation: String::from(INVALID_ACTION_OBSERVATION), score: self.current_reward(), terminal: false, fatal: false };
        self.record_step(&outcome, ActionCommand::noop(raw), rationale, GateMark::Invalid)
    }

    /// Closes a trace that stopped for a reason other than its own steps
    /// (an empty budget, for one).
    pub fn close(&mut self) {
        if self.ended_by.is_none() {
            self.ended_by = Some(EndReason::BudgetExhausted);
        }
    }

    pub fn push_completed(&mut self, subtask: String) {
        self.completed_subtasks.push(subtask);
    }

    fn best_before_fatal(&self) -> i32 {
        self.steps.iter().map(|s| s.reward).max().unwrap_or(0).max(0)
    }

    /// Indices (1-based) of steps whose cumulative reward strictly increased.
    pub fn rewarded_steps(&self) -> Vec<u32> {
        let mut prev = 0;
        let mut out = Vec::new();
        for step in &self.steps {
            if step.reward > prev {
                out.push(step.index);
            }
            prev = step.reward;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{ActionCommand, ActionVerb};

    fn outcome(score: i32, terminal: bool, fatal: bool) -> StepOutcome {
        StepOutcome { observation: String::from("ok"), score, terminal, fatal }
    }

    fn wait() -> ActionCommand {
        ActionCommand::new(ActionVerb::Wait, &[])
    }

    #[test]
    fn first_step_gets_index_one() {
        let mut t = TrialTrace::new(1, 37);
        let rec = t.record_step(&outcome(0, false, false), wait(), String::new(), GateMark::Approved { verdict: 1 }).unwrap();
        assert_eq!(rec.index, 1);
    }

    #[test]
    fn step_37_exhausts_short_budget() {
        let mut t = TrialTrace::new(1, 37);
        for _ in 0..36 {
            t.record_step(&outcome(0, false, false), wait(), String::new(), GateMark::Bypassed).unwrap();
        }
        assert!(!t.is_ended());
        let rec = t.record_step(&outcome(0, false, false), wait(), String::new(), GateMark::Bypassed).unwrap();
        assert_eq!(rec.index, 37);
        assert_eq!(t.ended_by, Some(EndReason::BudgetExhausted));
        assert!(t.record_step(&outcome(0, false, false), wait(), String::new(), GateMark::Bypassed).is_err());
    }

    #[test]
    fn fatal_ends_trace_with_prior_max() {
        let mut t = TrialTrace::new(1, 37);
        t.record_step(&outcome(30, false, false), wait(), String::new(), GateMark::Bypassed).unwrap();
        t.record_step(&outcome(0, true, true), wait(), String::new(), GateMark::Bypassed).unwrap();
        assert_eq!(t.ended_by, Some(EndReason::FatalPenalty));
        assert_eq!(t.final_reward, 30);
        assert_eq!(t.record_step(&outcome(0, false, false), wait(), String::new(), GateMark::Bypassed), Err(TraceError::Ended(EndReason::FatalPenalty)));
    }

    #[test]
    fn completion_on_last_budget_step_counts_as_complete() {
        let mut t = TrialTrace::new(1, 1);
        t.record_step(&outcome(100, true, false), wait(), String::new(), GateMark::Bypassed).unwrap();
        assert_eq!(t.ended_by, Some(EndReason::TaskComplete));
        assert_eq!(t.final_reward, 100);
    }

    #[test]
    fn invalid_steps_carry_the_previous_reward() {
        let mut t = TrialTrace::new(1, 37);
        t.record_step(&outcome(20, false, false), wait(), String::new(), GateMark::Bypassed).unwrap();
        let rec = t.record_invalid("fly away", String::new()).unwrap();
        assert_eq!(rec.reward, 20);
        assert_eq!(rec.observation, INVALID_ACTION_OBSERVATION);
        assert_eq!(rec.gate, GateMark::Invalid);
    }

    #[test]
    fn rewarded_steps_are_strict_increases() {
        let mut t = TrialTrace::new(1, 37);
        for s in [0, 20, 20, 40, 40, 60] {
            t.record_step(&outcome(s, false, false), wait(), String::new(), GateMark::Bypassed).unwrap();
        }
        assert_eq!(t.rewarded_steps(), [2, 4, 6]);
    }
}
