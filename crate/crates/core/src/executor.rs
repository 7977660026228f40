//! The Executor turns the current subtask into a rationale and one action.

use alloc::borrow::ToOwned;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::action::{parse_command, ActionCommand, ActionParseError};
use crate::backend::Role;
use crate::memory::{Insight, InsightId};
use crate::planner::PlanDirective;
use crate::prompting::{labeled, render_history, render_insights, RoleCtx, RoleError, NO_INSIGHTS};
use crate::template::{self, Context};
use crate::trace::StepRecord;

/// Evaluator feedback on a rejected candidate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feedback {
    pub message: String,
    pub rejected_action: ActionCommand,
    pub violated_rule: Option<InsightId>,
}

impl Feedback {
    /// Block inserted verbatim into the next Executor prompt.
    pub fn render(&self) -> String {
        alloc::format!("Feedback on your previous proposal \"{}\":\n{}\nPropose a different action.\n", self.rejected_action.raw, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ActionResponseError {
    #[error("response has no ACTION line")]
    MissingAction,
    #[error(transparent)]
    Grammar(#[from] ActionParseError),
}

/// Splits a `THINK:`/`ACTION:` response. The rationale is optional.
pub fn parse_action_response(text: &str) -> Result<(String, ActionCommand), ActionResponseError> {
    let action = labeled(text, "ACTION").ok_or(ActionResponseError::MissingAction)?;
    let rationale = labeled(text, "THINK").unwrap_or_default().to_owned();
    Ok((rationale, parse_command(action)?))
}

/// Renders an action back into the response format.
pub fn render_action_response(rationale: &str, action: &ActionCommand) -> String {
    if rationale.is_empty() {
        alloc::format!("ACTION: {}", action.canonical())
    } else {
        alloc::format!("THINK: {rationale}\nACTION: {}", action.canonical())
    }
}

/// What the Executor is allowed to see.
pub enum ExecutorView<'a> {
    /// Normal operation: the subtask and the insights cited for it.
    Directed(&'a PlanDirective),
    /// Planner ablated: the whole task and every insight.
    Undirected { task: &'a str, insights: &'a [Insight] },
}

pub fn generate_action(
    ctx: &mut RoleCtx<'_>,
    view: &ExecutorView<'_>,
    history: &[StepRecord],
    feedback: Option<&Feedback>,
) -> Result<(String, ActionCommand), RoleError> {
    let mut c = Context::new();
    c.insert("history", render_history(history, None));
    c.insert("feedback", feedback.map(Feedback::render).unwrap_or_default());
    let template = match view {
        ExecutorView::Directed(d) => {
            c.insert("subtask", d.subtask.clone());
            c.insert("insights", render_insights(&d.relevant_insights, "(none)"));
            template::EXECUTOR_ACT
        }
        ExecutorView::Undirected { task, insights } => {
            c.insert("task", (*task).to_owned());
            c.insert("insights", render_insights(insights, NO_INSIGHTS));
            template::EXECUTOR_SOLO
        }
    };
    ctx.ask_parsed(Role::Executor, template, &c, parse_action_response)
}
