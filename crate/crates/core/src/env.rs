//! The reset/step surface every environment speaks, plus the episode
//! scoring rule.

use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::action::ActionCommand;

/// Simulator response to one action.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StepOutcome {
    pub observation: String,
    /// Cumulative score after the step.
    pub score: i32,
    pub terminal: bool,
    /// Focus on an unapproved object; the episode is over and the score void.
    pub fatal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnvError {
    #[error("unknown task \"{0}\"")]
    UnknownTask(String),
    #[error("episode is over; reset before stepping")]
    EpisodeOver,
    #[error("environment not reset")]
    NotReset,
    #[error("environment protocol violation: {0}")]
    Protocol(String),
}

pub trait Environment {
    /// Instantiates the task variation and returns the opening observation.
    fn reset(&mut self, task_id: &str, variation_seed: u64) -> Result<String, EnvError>;

    fn step(&mut self, action: &ActionCommand) -> Result<StepOutcome, EnvError>;
}

impl<E: Environment + ?Sized> Environment for &mut E {
    fn reset(&mut self, task_id: &str, variation_seed: u64) -> Result<String, EnvError> {
        (**self).reset(task_id, variation_seed)
    }

    fn step(&mut self, action: &ActionCommand) -> Result<StepOutcome, EnvError> {
        (**self).step(action)
    }
}

/// Recorded score of one episode.
///
/// After a fatal step the episode keeps the best cumulative score reached
/// strictly before it; otherwise the final cumulative score counts. Never
/// negative.
pub fn episode_score(outcomes: &[StepOutcome]) -> i32 {
    match outcomes.iter().position(|o| o.fatal) {
        Some(first_fatal) => outcomes[..first_fatal].iter().map(|o| o.score).max().unwrap_or(0).max(0),
        None => outcomes.last().map_or(0, |o| o.score.max(0)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn o(score: i32, terminal: bool, fatal: bool) -> StepOutcome {
        StepOutcome { observation: String::new(), score, terminal, fatal }
    }

    #[test]
    fn prior_max_on_fatal() {
        let seq = [o(10, false, false), o(30, false, false), o(30, false, false), o(-100, true, true)];
        assert_eq!(episode_score(&seq), 30);
    }

    #[test]
    fn final_on_completion() {
        let seq = [o(10, false, false), o(60, false, false), o(100, true, false)];
        assert_eq!(episode_score(&seq), 100);
    }

    #[test]
    fn empty_is_zero() {
        assert_eq!(episode_score(&[]), 0);
        assert_eq!(episode_score(&[o(-100, true, true)]), 0);
    }
}
