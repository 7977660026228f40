//! Step-budget invariants under a backend that answers at random.

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use step_core::action::ActionCommand;
use step_core::agent::{Agent, RunConfig};
use step_core::backend::{BackendError, CompletionBackend, CompletionRequest, Role};
use step_core::env::{EnvError, Environment, StepOutcome};
use step_core::memory::MemoryStore;
use step_core::template::TemplateSet;
use step_core::trace::GateMark;
use step_core::world::{TextWorld, WorldDef};

use super::runner;
use super::worlds::vocabulary;

/// Answers every role with a random, mostly well-formed response.
pub struct RandomBackend {
    rng: ChaCha8Rng,
    actions: Vec<String>,
    /// Chance that a call fails outright.
    failure_rate: f64,
}

impl RandomBackend {
    pub fn new(seed: u64, def: &WorldDef, failure_rate: f64) -> Self {
        let verbs = ["go to", "focus on", "pick up", "open", "look at", "use thermometer on", "move", "wait", "fly to", "mix", "put down"];
        let nouns = vocabulary(def);
        let mut actions = vec!["look around".to_owned(), "inventory".to_owned(), "wait 2".to_owned()];
        for v in verbs {
            for n in &nouns {
                actions.push(format!("{v} {n}"));
            }
        }
        RandomBackend { rng: ChaCha8Rng::seed_from_u64(seed), actions, failure_rate }
    }

    fn pick<'a>(&mut self, options: &[&'a str]) -> &'a str {
        options[self.rng.gen_range(0..options.len())]
    }
}

impl CompletionBackend for RandomBackend {
    fn complete(&mut self, request: &CompletionRequest) -> Result<String, BackendError> {
        if self.rng.gen_bool(self.failure_rate) {
            return Err(BackendError::Transport { attempts: 1, message: "random outage".into() });
        }
        let garbage = self.rng.gen_bool(0.05);
        Ok(match request.role {
            _ if garbage => "I am not sure what to say.".to_owned(),
            Role::Planner => {
                let cite = self.pick(&["none", "[1]", "[1, 2]", "[9]"]);
                format!("SUBTASK: subtask {}\nINSIGHTS: {cite}", self.rng.gen_range(0..100))
            }
            Role::Executor => {
                let action = self.actions[self.rng.gen_range(0..self.actions.len())].clone();
                format!("THINK: trying something\nACTION: {action}")
            }
            Role::Evaluator => self
                .pick(&[
                    "VERDICT: APPROVE\nDONE: NO",
                    "VERDICT: APPROVE\nDONE: NO",
                    "VERDICT: APPROVE\nDONE: YES",
                    "VERDICT: REJECT\nREASON: violates rule [1]",
                    "VERDICT: REJECT",
                ])
                .to_owned(),
            Role::Memory => self
                .pick(&[
                    "INSIGHT: going to the kitchen does not contribute to the task",
                    "INSIGHT: focusing on the thermometer is necessary for the task\nINSIGHT: waiting may not contribute to the task",
                    "INSIGHTS: none",
                    "ESSENTIAL: [1, 2]",
                    "MILESTONE: do the thing [1]",
                ])
                .to_owned(),
        })
    }
}

/// Counts environment steps per episode.
pub struct CountingEnv<E> {
    pub inner: E,
    /// One entry per reset.
    pub episodes: Vec<u32>,
}

impl<E> CountingEnv<E> {
    pub fn new(inner: E) -> Self {
        CountingEnv { inner, episodes: Vec::new() }
    }
}

impl<E: Environment> Environment for CountingEnv<E> {
    fn reset(&mut self, task_id: &str, variation_seed: u64) -> Result<String, EnvError> {
        self.episodes.push(0);
        self.inner.reset(task_id, variation_seed)
    }

    fn step(&mut self, action: &ActionCommand) -> Result<StepOutcome, EnvError> {
        if let Some(n) = self.episodes.last_mut() {
            *n += 1;
        }
        self.inner.step(action)
    }
}

fn config() -> impl Strategy<Value = RunConfig> {
    (1u32..=2, 1u32..=12, 1u32..=4, any::<bool>(), any::<bool>()).prop_map(|(attempts, max_sub_steps, rejection_cap, planner, evaluator)| RunConfig {
        attempts,
        max_sub_steps,
        rejection_cap,
        planner_enabled: planner,
        evaluator_enabled: evaluator,
    })
}

/// Totals over a budget suite run.
#[derive(Debug, Default, Clone, Copy)]
pub struct BudgetStats {
    pub runs: u32,
    pub trials: u32,
    pub trials_at_budget: u32,
}

/// Random configurations and random responses: no trial records or sends
/// more steps than its budget allows, and every recorded step other than an
/// invalid one reached the environment.
pub fn budget_invariants(worlds: &[WorldDef], cases: u32) -> Result<BudgetStats, String> {
    let stats = std::cell::Cell::new(BudgetStats::default());
    let templates = TemplateSet::builtin();
    let per_world = cases.div_ceil(worlds.len() as u32);
    for def in worlds {
        let budget = def.task_spec(0).budget();
        runner(per_world)
            .run(&(config(), any::<u64>(), 0u64..3), |(config, seed, variation)| {
                let spec = def.task_spec(variation);
                let mut backend = RandomBackend::new(seed, def, 0.002);
                let mut env = CountingEnv::new(TextWorld::new(vec![def.clone()]));
                let mut agent = Agent::new(&mut backend, &templates, config).expect("valid config");
                let result = agent.run_task(&mut env, &spec, MemoryStore::empty(&def.task_id)).map_err(|e| TestCaseError::fail(format!("run failed: {e}")))?;
                let mut s = stats.get();
                s.runs += 1;
                for a in &result.attempts {
                    s.trials += 1;
                    let len = a.trace.len();
                    if len > budget {
                        return Err(TestCaseError::fail(format!("attempt {} recorded {len} steps over budget {budget}", a.attempt)));
                    }
                    if len == budget {
                        s.trials_at_budget += 1;
                    }
                    if a.trace.steps.iter().enumerate().any(|(i, st)| st.index != i as u32 + 1) {
                        return Err(TestCaseError::fail("step indices are not contiguous from 1".to_owned()));
                    }
                    let invalid = a.trace.steps.iter().filter(|st| st.gate == GateMark::Invalid).count() as u32;
                    let sent = env.episodes[a.attempt as usize - 1];
                    if sent > budget || sent != len - invalid {
                        return Err(TestCaseError::fail(format!(
                            "attempt {}: environment saw {sent} steps, trace has {len} with {invalid} invalid",
                            a.attempt
                        )));
                    }
                }
                stats.set(s);
                Ok(())
            })
            .map_err(|e| format!("{}: {e}", def.task_id))?;
    }
    Ok(stats.get())
}
