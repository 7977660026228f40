//! Episode bookkeeping: episode_score oracles and score monotonicity over
//! random action sequences.

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use step_core::action::{ActionCommand, ActionVerb, Arity};
use step_core::env::{episode_score, Environment, StepOutcome};
use step_core::world::{TextWorld, WorldDef};

use super::runner;
use super::worlds::vocabulary;

fn o(score: i32, terminal: bool, fatal: bool) -> StepOutcome {
    StepOutcome { observation: String::new(), score, terminal, fatal }
}

/// Hand-computed cases: prior maximum on a fatal step, final score on
/// completion, zero for an empty episode.
pub fn episode_score_oracles() -> Result<(), String> {
    let cases: [(&str, Vec<StepOutcome>, i32); 8] = [
        ("empty episode", vec![], 0),
        ("completion keeps the final score", vec![o(20, false, false), o(50, false, false), o(100, true, false)], 100),
        ("budget end keeps the final score", vec![o(30, false, false), o(30, false, false)], 30),
        ("fatal keeps the prior maximum", vec![o(20, false, false), o(40, false, false), o(0, true, true)], 40),
        ("fatal on the first step scores zero", vec![o(0, true, true)], 0),
        ("fatal ignores its own signed score", vec![o(10, false, false), o(-100, true, true)], 10),
        ("steps after a fatal do not count", vec![o(10, false, false), o(0, true, true), o(90, false, false)], 10),
        ("negative running score clamps to zero", vec![o(-5, false, false)], 0),
    ];
    for (name, outcomes, want) in cases {
        let got = episode_score(&outcomes);
        if got != want {
            return Err(format!("{name}: episode_score = {got}, want {want}"));
        }
    }
    Ok(())
}

/// Independent restatement of the scoring rule, checked on random outcome lists.
pub fn episode_score_matches_oracle(cases: u32) -> Result<(), String> {
    let outcome = (-100i32..=100, any::<bool>(), prop::bool::weighted(0.1)).prop_map(|(s, t, f)| o(s, t, f));
    runner(cases)
        .run(&proptest::collection::vec(outcome, 0..40), |outcomes| {
            let mut best = 0;
            let mut want = None;
            for out in &outcomes {
                if out.fatal {
                    want = Some(best);
                    break;
                }
                best = best.max(out.score);
            }
            let want = want.unwrap_or_else(|| outcomes.last().map_or(0, |l| l.score.max(0)));
            let got = episode_score(&outcomes);
            if got != want || got < 0 {
                return Err(TestCaseError::fail(format!("episode_score = {got}, want {want}")));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Verbs weighted toward the ones that move the score.
fn verb() -> impl Strategy<Value = ActionVerb> {
    prop_oneof![
        6 => Just(ActionVerb::GoTo),
        4 => Just(ActionVerb::FocusOn),
        4 => Just(ActionVerb::PickUp),
        3 => Just(ActionVerb::Open),
        2 => Just(ActionVerb::Use),
        2 => Just(ActionVerb::Move),
        2 => Just(ActionVerb::Pour),
        1 => Just(ActionVerb::Mix),
        3 => proptest::sample::select(ActionVerb::ALL.to_vec()),
    ]
}

fn command(vocab: Vec<String>) -> impl Strategy<Value = ActionCommand> {
    let n = vocab.len();
    (verb(), 0..n, 0..n, any::<bool>(), 1u32..5).prop_map(move |(verb, a, b, second, dur)| {
        let (a, b) = (vocab[a].as_str(), vocab[b].as_str());
        let d = dur.to_string();
        match verb.arity() {
            Arity::None => ActionCommand::new(verb, &[]),
            Arity::One => ActionCommand::new(verb, &[a]),
            Arity::Two(_) => ActionCommand::new(verb, &[a, b]),
            Arity::OneOrTwo(_) if second => ActionCommand::new(verb, &[a, b]),
            Arity::OneOrTwo(_) => ActionCommand::new(verb, &[a]),
            Arity::Duration if second => ActionCommand::new(verb, &[d.as_str()]),
            Arity::Duration => ActionCommand::new(verb, &[]),
        }
    })
}

fn play(world: &mut TextWorld, task_id: &str, seed: u64, actions: &[ActionCommand]) -> Vec<StepOutcome> {
    world.reset(task_id, seed).expect("task exists");
    let mut out = Vec::new();
    for a in actions {
        let step = world.step(a).expect("episode still running");
        let end = step.terminal;
        out.push(step);
        if end {
            break;
        }
    }
    out
}

/// For random action sequences: the cumulative score never drops before the
/// first fatal step, a fatal step is terminal, and replaying the same
/// sequence at the same seed gives the same outcomes. Returns how many
/// sequences scored above zero.
pub fn score_monotonicity(worlds: &[WorldDef], cases: u32) -> Result<u32, String> {
    let world = std::cell::RefCell::new(TextWorld::new(worlds.to_vec()));
    let scored = std::cell::Cell::new(0u32);
    let per_world = cases.div_ceil(worlds.len() as u32);
    for def in worlds {
        let strategy = (proptest::collection::vec(command(vocabulary(def)), 1..80), 0u64..4);
        runner(per_world)
            .run(&strategy, |(actions, seed)| {
                let outcomes = play(&mut world.borrow_mut(), &def.task_id, seed, &actions);
                let mut prev = 0;
                for (i, out) in outcomes.iter().enumerate() {
                    if out.fatal {
                        if !out.terminal {
                            return Err(TestCaseError::fail(format!("step {}: fatal but not terminal", i + 1)));
                        }
                        break;
                    }
                    if out.score < prev || out.score < 0 {
                        return Err(TestCaseError::fail(format!("step {} ({}): score fell from {prev} to {}", i + 1, actions[i].raw, out.score)));
                    }
                    prev = out.score;
                }
                if prev > 0 {
                    scored.set(scored.get() + 1);
                }
                let again = play(&mut world.borrow_mut(), &def.task_id, seed, &actions);
                if again != outcomes {
                    return Err(TestCaseError::fail("same seed and actions gave different outcomes".to_owned()));
                }
                Ok(())
            })
            .map_err(|e| format!("{}: {e}", def.task_id))?;
    }
    Ok(scored.get())
}
