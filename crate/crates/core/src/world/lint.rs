use alloc::borrow::ToOwned;
use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::{Condition, WorldDef, WorldState, INVENTORY, NOWHERE};

/// Upper bound on distinct states visited by the reachability search.
pub const SEARCH_STATE_LIMIT: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LintProblem {
    #[error("subgoal points sum to {0}, expected 100")]
    PointsTotal(u32),
    #[error("the goal program has no required subgoals")]
    NoRequired,
    #[error("duplicate {kind} \"{name}\"")]
    Duplicate { kind: &'static str, name: String },
    #[error("{context} refers to unknown {kind} \"{name}\"")]
    Unknown { context: String, kind: &'static str, name: String },
    #[error("required focus target \"{0}\" is not on the focus whitelist")]
    FocusNotWhitelisted(String),
    #[error("object \"{0}\" is contained in itself")]
    ContainmentCycle(String),
    #[error("required subgoal \"{id}\" cannot be reached within {budget} steps")]
    Unreachable { id: String, budget: u32 },
}

/// Every problem found in one world definition.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("world \"{task_id}\" is invalid: {}", Problems(problems))]
pub struct LintError {
    pub task_id: String,
    pub problems: Vec<LintProblem>,
}

struct Problems<'a>(&'a [LintProblem]);

impl fmt::Display for Problems<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LintReport {
    /// Length of the shortest completing action sequence, when the search found one.
    pub shortest_solution: Option<u32>,
    pub states_explored: usize,
    pub warnings: Vec<String>,
}

/// Structural checks, then a breadth-first search proving the required
/// subgoals can all be completed within the step budget.
pub fn lint_world(def: &WorldDef) -> Result<LintReport, LintError> {
    let mut problems = structural_problems(def);
    if !problems.is_empty() {
        return Err(LintError { task_id: def.task_id.clone(), problems });
    }
    let budget = def.budget_kind.step_budget();
    let search = search(def, budget);
    let mut warnings = Vec::new();
    match search.solved_at {
        Some(_) => {}
        None if search.truncated => {
            warnings.push(alloc::format!("reachability search stopped after {} states without finishing; solvability not proven", search.explored))
        }
        None => problems.push(LintProblem::Unreachable { id: def.goal_program.required[search.best_required].id.clone(), budget }),
    }
    if !problems.is_empty() {
        return Err(LintError { task_id: def.task_id.clone(), problems });
    }
    Ok(LintReport { shortest_solution: search.solved_at, states_explored: search.explored, warnings })
}

fn duplicates<'a>(kind: &'static str, names: impl IntoIterator<Item = &'a str>, out: &mut Vec<LintProblem>) {
    let mut seen = BTreeSet::new();
    for n in names {
        if !seen.insert(n) {
            out.push(LintProblem::Duplicate { kind, name: n.to_owned() });
        }
    }
}

fn structural_problems(def: &WorldDef) -> Vec<LintProblem> {
    let mut out = Vec::new();
    let total = def.total_points();
    if total != 100 {
        out.push(LintProblem::PointsTotal(total));
    }
    if def.goal_program.required.is_empty() {
        out.push(LintProblem::NoRequired);
    }
    duplicates("room", def.rooms.iter().map(|r| r.name.as_str()), &mut out);
    duplicates("object", def.objects.iter().map(|o| o.name.as_str()), &mut out);
    duplicates("subgoal id", def.goal_program.required.iter().chain(&def.goal_program.optional).map(|g| g.id.as_str()), &mut out);

    let unknown = |context: String, kind: &'static str, name: &str| LintProblem::Unknown { context, kind, name: name.to_owned() };
    let is_room = |n: &str| def.room(n).is_some();
    let is_object = |n: &str| def.object(n).is_some();
    if !is_room(&def.start_room) {
        out.push(unknown("start_room".into(), "room", &def.start_room));
    }
    for c in &def.connections {
        for r in &c.between {
            if !is_room(r) {
                out.push(unknown("a connection".into(), "room", r));
            }
        }
    }
    for o in &def.objects {
        let loc = o.location.as_str();
        if loc != INVENTORY && loc != NOWHERE && !is_room(loc) {
            match def.object(loc) {
                Some(c) if c.container.is_some() => {}
                _ => out.push(unknown(alloc::format!("location of \"{}\"", o.name), "room or container", loc)),
            }
        }
        for r in &o.legal_rooms {
            if !is_room(r) {
                out.push(unknown(alloc::format!("legal_rooms of \"{}\"", o.name), "room", r));
            }
        }
        let mut current = loc;
        for _ in 0..=def.objects.len() {
            match def.object(current) {
                Some(parent) if parent.name == o.name => {
                    out.push(LintProblem::ContainmentCycle(o.name.clone()));
                    break;
                }
                Some(parent) => current = &parent.location,
                None => break,
            }
        }
    }
    for g in def.goal_program.required.iter().chain(&def.goal_program.optional) {
        if let Condition::AgentIn { room } = &g.condition {
            if !is_room(room) {
                out.push(unknown(alloc::format!("subgoal \"{}\"", g.id), "room", room));
            }
        }
        for o in g.condition.objects() {
            if !is_object(o) {
                out.push(unknown(alloc::format!("subgoal \"{}\"", g.id), "object", o));
            }
        }
    }
    for w in &def.focus_whitelist {
        if !is_object(w) {
            out.push(unknown("focus_whitelist".into(), "object", w));
        }
    }
    for g in &def.goal_program.required {
        if let Condition::Focused { object } = &g.condition {
            if !def.focus_whitelist.contains(object) {
                out.push(LintProblem::FocusNotWhitelisted(object.clone()));
            }
        }
    }
    for recipe in &def.mix_recipes {
        for n in recipe.ingredients.iter().chain(core::iter::once(&recipe.product)) {
            if !is_object(n) {
                out.push(unknown("a mix recipe".into(), "object", n));
            }
        }
    }
    out
}

/// Objects a solution could need: those named by goals, recipes, or the
/// whitelist, plus everything that contains them.
fn relevant_objects(def: &WorldDef) -> BTreeSet<String> {
    let mut seeds: BTreeSet<String> = BTreeSet::new();
    for g in def.goal_program.required.iter().chain(&def.goal_program.optional) {
        seeds.extend(g.condition.objects().into_iter().map(str::to_owned));
    }
    for r in &def.mix_recipes {
        seeds.extend(r.ingredients.iter().cloned());
        seeds.insert(r.product.clone());
    }
    seeds.extend(def.focus_whitelist.iter().cloned());
    let mut out = seeds.clone();
    for s in &seeds {
        let mut current = s.as_str();
        for _ in 0..def.objects.len() {
            match def.object(current) {
                Some(o) if def.object(&o.location).is_some() => {
                    out.insert(o.location.clone());
                    current = &o.location;
                }
                _ => break,
            }
        }
    }
    out
}

struct SearchOutcome {
    solved_at: Option<u32>,
    best_required: usize,
    explored: usize,
    truncated: bool,
}

fn search(def: &WorldDef, budget: u32) -> SearchOutcome {
    let relevant = relevant_objects(def);
    let start = WorldState::initial(def, 0);
    let goal = def.goal_program.required.len();
    let mut best_required = start.required_done();
    let mut visited: BTreeSet<WorldState> = BTreeSet::new();
    visited.insert(start.clone());
    let mut frontier = alloc::vec![start];
    for depth in 1..=budget {
        let mut next = Vec::new();
        for state in &frontier {
            for action in state.search_actions(def, &relevant) {
                let mut s = state.clone();
                s.apply(def, &action);
                if s.is_fatal() {
                    continue;
                }
                best_required = best_required.max(s.required_done());
                if s.required_done() == goal {
                    return SearchOutcome { solved_at: Some(depth), best_required, explored: visited.len(), truncated: false };
                }
                if s.is_terminal() || visited.contains(&s) {
                    continue;
                }
                if visited.len() >= SEARCH_STATE_LIMIT {
                    return SearchOutcome { solved_at: None, best_required, explored: visited.len(), truncated: true };
                }
                visited.insert(s.clone());
                next.push(s);
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    SearchOutcome { solved_at: None, best_required: best_required.min(goal.saturating_sub(1)), explored: visited.len(), truncated: false }
}
