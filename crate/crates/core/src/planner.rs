//! The Planner: picks the next subtask and the insights relevant to it.

use alloc::borrow::ToOwned;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::backend::Role;
use crate::memory::{Insight, InsightId, Strategy};
use crate::prompting::{labeled, parse_id_list, render_history, render_insights, render_list, render_strategy, RoleCtx, RoleError, NO_COMPLETED, NO_INSIGHTS};
use crate::task::TaskSpec;
use crate::template::{self, Context};
use crate::trace::StepRecord;

/// Most recent action/observation pairs shown to the Planner.
pub const PLANNER_HISTORY_LIMIT: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DirectiveOrigin {
    Proposed,
    Refined,
}

/// What the Planner hands the Executor: one subtask and the insights cited for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanDirective {
    pub subtask: String,
    pub relevant_insights: Vec<Insight>,
    pub origin: DirectiveOrigin,
    /// Planner calls so far in this trial, this one included.
    pub planner_step: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlanParseError {
    #[error("response has no SUBTASK line")]
    MissingSubtask,
    #[error("SUBTASK line is empty")]
    EmptySubtask,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanResponse {
    pub subtask: String,
    pub cited: Vec<Insight>,
    pub warnings: Vec<String>,
}

/// Extracts the subtask and resolves `[id]` citations against `catalog`.
/// Unknown or garbled ids are dropped with a warning.
pub fn parse_plan_response(text: &str, catalog: &[Insight]) -> Result<PlanResponse, PlanParseError> {
    let subtask = labeled(text, "SUBTASK").ok_or(PlanParseError::MissingSubtask)?;
    if subtask.is_empty() {
        return Err(PlanParseError::EmptySubtask);
    }
    let mut warnings = Vec::new();
    let mut cited: Vec<Insight> = Vec::new();
    if let Some(list) = labeled(text, "INSIGHTS") {
        match parse_id_list(list) {
            Ok(ids) => {
                for id in ids {
                    match catalog.iter().find(|i| i.id == InsightId(id)) {
                        Some(i) if !cited.iter().any(|c| c.id == i.id) => cited.push(i.clone()),
                        Some(_) => {}
                        None => warnings.push(alloc::format!("cited insight [{id}] does not exist; dropped")),
                    }
                }
            }
            Err(token) => warnings.push(alloc::format!("unreadable insight citation \"{token}\"; citations dropped")),
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(PlanResponse { subtask: subtask.to_owned(), cited, warnings })
}

/// Inputs shared by proposing and refining.
pub struct PlannerInput<'a> {
    pub task: &'a TaskSpec,
    pub strategy: Option<&'a Strategy>,
    pub insights: &'a [Insight],
    pub history: &'a [StepRecord],
}

impl PlannerInput<'_> {
    fn context(&self) -> Context<'static> {
        let mut c = Context::new();
        c.insert("task", self.task.description.clone());
        c.insert("strategy", render_strategy(self.strategy));
        c.insert("insights", render_insights(self.insights, NO_INSIGHTS));
        c.insert("history", render_history(self.history, Some(PLANNER_HISTORY_LIMIT)));
        c
    }
}

/// Called at trial start and whenever the previous subtask is done.
pub fn propose_subtask(ctx: &mut RoleCtx<'_>, input: &PlannerInput<'_>, completed: &[String], planner_step: u32) -> Result<PlanDirective, RoleError> {
    let mut c = input.context();
    c.insert("completed", render_list(completed, NO_COMPLETED));
    let parsed = ctx.ask_parsed(Role::Planner, template::PLANNER_PROPOSE, &c, |t| parse_plan_response(t, input.insights))?;
    Ok(PlanDirective { subtask: parsed.subtask, relevant_insights: parsed.cited, origin: DirectiveOrigin::Proposed, planner_step })
}

/// Called when the sub-step allowance ran out with the subtask unfinished.
/// The completed-subtask list is not part of this prompt.
pub fn refine_subtask(ctx: &mut RoleCtx<'_>, input: &PlannerInput<'_>, current: &PlanDirective) -> Result<PlanDirective, RoleError> {
    let mut c = input.context();
    c.insert("subtask", current.subtask.clone());
    let parsed = ctx.ask_parsed(Role::Planner, template::PLANNER_REFINE, &c, |t| parse_plan_response(t, input.insights))?;
    Ok(PlanDirective { subtask: parsed.subtask, relevant_insights: parsed.cited, origin: DirectiveOrigin::Refined, planner_step: current.planner_step + 1 })
}
