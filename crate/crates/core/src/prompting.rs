//! Shared plumbing for the four roles: the call context, the one-shot
//! format re-prompt, and the text blocks every template renders.

use alloc::borrow::ToOwned;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{Display, Write};

use crate::backend::{BackendError, CompletionBackend, CompletionRequest, Coordinates, Role};
use crate::memory::{Insight, NegativeRule, Strategy};
use crate::template::{Context, TemplateError, TemplateSet};
use crate::trace::StepRecord;

pub const NO_ACTIONS: &str = "(no actions yet)";
pub const NO_STRATEGY: &str = "(no prior strategy)";
pub const NO_INSIGHTS: &str = "(no insights yet)";
pub const NO_RULES: &str = "(no rules)";
pub const NO_COMPLETED: &str = "(none yet)";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RoleError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("{role} response unusable after re-prompt: {detail}")]
    Malformed { role: Role, detail: String },
}

/// Everything a role needs to talk to its model.
pub struct RoleCtx<'a> {
    pub backend: &'a mut dyn CompletionBackend,
    pub templates: &'a TemplateSet,
    pub coords: Coordinates,
}

impl RoleCtx<'_> {
    pub fn ask(&mut self, role: Role, template: &str, ctx: &Context<'_>) -> Result<String, RoleError> {
        let prompt = self.templates.render(template, ctx)?;
        self.send(role, template, prompt)
    }

    fn send(&mut self, role: Role, template: &str, prompt: String) -> Result<String, RoleError> {
        let request = CompletionRequest::new(role, template, prompt, self.coords);
        Ok(self.backend.complete(&request)?)
    }

    /// Asks, parses, and on a parse failure re-asks once with a format
    /// reminder appended.
    pub fn ask_parsed<T, E: Display>(&mut self, role: Role, template: &str, ctx: &Context<'_>, parse: impl Fn(&str) -> Result<T, E>) -> Result<T, RoleError> {
        let prompt = self.templates.render(template, ctx)?;
        let first = self.send(role, template, prompt.clone())?;
        let err = match parse(&first) {
            Ok(v) => return Ok(v),
            Err(e) => e,
        };
        log::warn!("{role} response did not parse ({err}); re-prompting");
        let reminder = alloc::format!("{prompt}\nYour previous answer could not be used ({err}). Answer again using exactly the requested format.\n");
        let second = self.send(role, template, reminder)?;
        parse(&second).map_err(|e| RoleError::Malformed { role, detail: alloc::format!("{e}") })
    }
}

/// Renders action/observation pairs, oldest first, without rationales.
/// `limit` keeps only the most recent pairs.
pub fn render_history(steps: &[StepRecord], limit: Option<usize>) -> String {
    if steps.is_empty() {
        return NO_ACTIONS.to_owned();
    }
    let skip = limit.map_or(0, |l| steps.len().saturating_sub(l));
    let mut out = String::new();
    if skip > 0 {
        let _ = writeln!(out, "({skip} earlier steps omitted)");
    }
    for s in &steps[skip..] {
        let _ = writeln!(out, "> {}", s.action.raw);
        let _ = writeln!(out, "{}", s.observation.trim_end());
    }
    out
}

pub fn render_insights(insights: &[Insight], empty: &str) -> String {
    if insights.is_empty() {
        return empty.to_owned();
    }
    insights.iter().map(|i| alloc::format!("[{}] {}", i.id, i.sentence())).collect::<Vec<_>>().join("\n")
}

pub fn render_rules(rules: &[NegativeRule]) -> String {
    if rules.is_empty() {
        return NO_RULES.to_owned();
    }
    rules.iter().map(|r| alloc::format!("[{}] {}", r.id, r.text)).collect::<Vec<_>>().join("\n")
}

pub fn render_strategy(strategy: Option<&Strategy>) -> String {
    match strategy {
        Some(s) if !s.milestones.is_empty() => {
            s.milestones.iter().enumerate().map(|(i, m)| alloc::format!("{}. {}", i + 1, m.text)).collect::<Vec<_>>().join("\n")
        }
        _ => NO_STRATEGY.to_owned(),
    }
}

pub fn render_list(items: &[String], empty: &str) -> String {
    if items.is_empty() {
        return empty.to_owned();
    }
    items.iter().enumerate().map(|(i, s)| alloc::format!("{}. {s}", i + 1)).collect::<Vec<_>>().join("\n")
}

/// Returns the text after `label:` on the first line carrying that label
/// (case-insensitive, leading list markers ignored).
pub(crate) fn labeled<'t>(text: &'t str, label: &str) -> Option<&'t str> {
    text.lines().find_map(|line| strip_label(line, label))
}

pub(crate) fn strip_label<'t>(line: &'t str, label: &str) -> Option<&'t str> {
    let line = line.trim().trim_start_matches(['-', '*', ' ']);
    let head = line.get(..label.len())?;
    if !head.eq_ignore_ascii_case(label) {
        return None;
    }
    line[label.len()..].trim_start().strip_prefix(':').map(str::trim)
}

/// Parses `[1, 3]`, `[1][3]`, `1, 3`; `none` or empty gives an empty list.
/// Returns the tokens that are not integers as the error.
pub(crate) fn parse_id_list(text: &str) -> Result<Vec<u32>, String> {
    let t = text.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("none") || t.eq_ignore_ascii_case("[]") || t.eq_ignore_ascii_case("[none]") {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for token in t.split(|c: char| c == ',' || c == '[' || c == ']' || c.is_whitespace()) {
        if token.is_empty() {
            continue;
        }
        match token.trim_start_matches('#').parse::<u32>() {
            Ok(id) => out.push(id),
            Err(_) => return Err(token.to_owned()),
        }
    }
    Ok(out)
}
