//! The Evaluator gates candidates against the attempt's negative rules and
//! reports whether the current subtask is done.

use alloc::borrow::ToOwned;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::action::ActionCommand;
use crate::backend::Role;
use crate::executor::Feedback;
use crate::memory::{InsightId, NegativeRule};
use crate::prompting::{labeled, parse_id_list, render_history, render_rules, RoleCtx, RoleError};
use crate::template::{self, Context};
use crate::trace::StepRecord;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub approved: bool,
    /// Present exactly when the candidate was rejected.
    pub feedback: Option<Feedback>,
    pub subtask_done: bool,
    pub rule_checked_count: usize,
    /// Approved without a usable judgment (Evaluator malfunction).
    pub fail_open: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParsedVerdict<'a> {
    pub approve: bool,
    pub done: bool,
    pub reason: Option<&'a str>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VerdictParseError {
    #[error("response has no VERDICT line")]
    MissingVerdict,
    #[error("VERDICT must be APPROVE or REJECT, got \"{0}\"")]
    BadVerdict(String),
}

/// Reads `VERDICT: APPROVE|REJECT`, `DONE: YES|NO`, and optional `REASON:`.
/// `VERDICT: APPROVE, DONE` is accepted as shorthand.
pub fn parse_verdict(text: &str) -> Result<ParsedVerdict<'_>, VerdictParseError> {
    let verdict = labeled(text, "VERDICT").ok_or(VerdictParseError::MissingVerdict)?;
    let upper = verdict.to_ascii_uppercase();
    let approve = match (upper.contains("APPROVE"), upper.contains("REJECT")) {
        (true, false) => true,
        (false, true) => false,
        _ => return Err(VerdictParseError::BadVerdict(verdict.to_owned())),
    };
    let done = match labeled(text, "DONE") {
        Some(d) => d.to_ascii_uppercase().starts_with("YES"),
        None => upper.contains("DONE"),
    };
    let reason = labeled(text, "REASON").filter(|r| !r.is_empty());
    Ok(ParsedVerdict { approve, done, reason })
}

/// Judges `candidate` against `rules` only, not against task quality.
///
/// An unusable answer is re-asked once; a second failure approves with
/// `fail_open` set and `subtask_done` false.
pub fn evaluate_candidate(
    ctx: &mut RoleCtx<'_>,
    subtask: &str,
    rules: &[NegativeRule],
    candidate: &ActionCommand,
    history: &[StepRecord],
) -> Result<Verdict, RoleError> {
    let mut c = Context::new();
    c.insert("subtask", subtask.to_owned());
    c.insert("rules", render_rules(rules));
    c.insert("history", render_history(history, None));
    c.insert("candidate", candidate.raw.clone());
    let parsed = ctx.ask_parsed(Role::Evaluator, template::EVALUATOR_JUDGE, &c, |t| parse_verdict(t).map(|v| (v.approve, v.done, v.reason.map(str::to_owned))));
    let (approve, done, reason) = match parsed {
        Ok(v) => v,
        Err(RoleError::Malformed { detail, .. }) => {
            log::warn!("evaluator unusable ({detail}); approving candidate \"{}\" unchecked", candidate.raw);
            return Ok(Verdict { approved: true, feedback: None, subtask_done: false, rule_checked_count: rules.len(), fail_open: true });
        }
        Err(other) => return Err(other),
    };
    // with no rules there is nothing to violate
    if approve || rules.is_empty() {
        return Ok(Verdict { approved: true, feedback: None, subtask_done: done, rule_checked_count: rules.len(), fail_open: false });
    }
    let violated_rule = reason.as_deref().and_then(|r| cited_rule(r, rules)).or_else(|| (rules.len() == 1).then(|| rules[0].id));
    let message = match (&reason, violated_rule.and_then(|id| rules.iter().find(|r| r.id == id))) {
        (Some(reason), _) => alloc::format!("rejected: {reason}"),
        (None, Some(rule)) => alloc::format!("rejected: violates rule [{}] {}", rule.id, rule.text),
        (None, None) => "rejected: the action conflicts with a learned rule".to_owned(),
    };
    Ok(Verdict {
        approved: false,
        feedback: Some(Feedback { message, rejected_action: candidate.clone(), violated_rule }),
        subtask_done: false,
        rule_checked_count: rules.len(),
        fail_open: false,
    })
}

/// First `[n]` in `reason` that names a rule id.
fn cited_rule(reason: &str, rules: &[NegativeRule]) -> Option<InsightId> {
    let mut rest = reason;
    while let Some(open) = rest.find('[') {
        let close = rest[open..].find(']').map(|c| open + c)?;
        if let Ok(ids) = parse_id_list(&rest[open..=close]) {
            if let Some(id) = ids.into_iter().map(InsightId).find(|id| rules.iter().any(|r| r.id == *id)) {
                return Some(id);
            }
        }
        rest = &rest[close + 1..];
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateDecision {
    Retry,
    ForceExecute,
}

/// Liveness guard: after `cap` consecutive rejections the latest candidate
/// runs anyway.
pub fn deliberation_gate(rejections: u32, cap: u32) -> GateDecision {
    if rejections < cap {
        GateDecision::Retry
    } else {
        GateDecision::ForceExecute
    }
}
