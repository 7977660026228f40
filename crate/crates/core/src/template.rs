//! Prompt templates with `{name}` placeholders.
//!
//! A placeholder is a `{` immediately followed by `[a-z0-9_]+` and `}`; any
//! other brace is literal text.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::string::String;

pub const PLANNER_PROPOSE: &str = "planner.propose";
pub const PLANNER_REFINE: &str = "planner.refine";
pub const EXECUTOR_ACT: &str = "executor.act";
pub const EXECUTOR_SOLO: &str = "executor.solo";
pub const EVALUATOR_JUDGE: &str = "evaluator.judge";
pub const MEMORY_REFLECT: &str = "memory.reflect";
pub const MEMORY_ESSENTIAL: &str = "memory.essential";
pub const MEMORY_ABSTRACT: &str = "memory.abstract";

const BUILTIN: [(&str, &str); 8] = [
    (PLANNER_PROPOSE, include_str!("../templates/planner.propose.txt")),
    (PLANNER_REFINE, include_str!("../templates/planner.refine.txt")),
    (EXECUTOR_ACT, include_str!("../templates/executor.act.txt")),
    (EXECUTOR_SOLO, include_str!("../templates/executor.solo.txt")),
    (EVALUATOR_JUDGE, include_str!("../templates/evaluator.judge.txt")),
    (MEMORY_REFLECT, include_str!("../templates/memory.reflect.txt")),
    (MEMORY_ESSENTIAL, include_str!("../templates/memory.essential.txt")),
    (MEMORY_ABSTRACT, include_str!("../templates/memory.abstract.txt")),
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("unknown template id \"{0}\"")]
    UnknownTemplate(String),
    #[error("template \"{template}\": placeholder {{{placeholder}}} is not bound")]
    Unbound { template: String, placeholder: String },
}

/// Named-value context for one render.
pub type Context<'a> = BTreeMap<&'a str, String>;

/// Template registry keyed by template id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    templates: BTreeMap<String, String>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl TemplateSet {
    pub fn builtin() -> Self {
        TemplateSet { templates: BUILTIN.iter().map(|(id, text)| ((*id).to_owned(), (*text).to_owned())).collect() }
    }

    /// Adds or replaces a template.
    pub fn insert(&mut self, id: impl Into<String>, text: impl Into<String>) {
        self.templates.insert(id.into(), text.into());
    }

    pub fn get(&self, id: &str) -> Option<&str> {
        self.templates.get(id).map(String::as_str)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    pub fn render(&self, id: &str, ctx: &Context<'_>) -> Result<String, TemplateError> {
        let text = self.get(id).ok_or_else(|| TemplateError::UnknownTemplate(id.to_owned()))?;
        render_text(text, ctx).map_err(|placeholder| TemplateError::Unbound { template: id.to_owned(), placeholder })
    }
}

/// Substitutes placeholders; returns the first unbound name on failure.
pub fn render_text(text: &str, ctx: &Context<'_>) -> Result<String, String> {
    let mut out = String::with_capacity(text.len() + 256);
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let name_len = after.bytes().take_while(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || *b == b'_').count();
        if name_len > 0 && after.as_bytes().get(name_len) == Some(&b'}') {
            let name = &after[..name_len];
            let value = ctx.get(name).ok_or_else(|| name.to_owned())?;
            out.push_str(value);
            rest = &after[name_len + 1..];
        } else {
            out.push('{');
            rest = after;
        }
    }
    out.push_str(rest);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exec_ctx() -> Context<'static> {
        let mut ctx = Context::new();
        ctx.insert("subtask", "find the thermometer".into());
        ctx.insert("insights", "[2] going to the kitchen is necessary for finding the thermometer".into());
        ctx.insert("history", "(no actions yet)".into());
        ctx.insert("feedback", String::new());
        ctx
    }

    #[test]
    fn executor_template_substitutes_fields() {
        let set = TemplateSet::builtin();
        let out = set.render(EXECUTOR_ACT, &exec_ctx()).unwrap();
        assert!(out.contains("find the thermometer"));
        assert!(out.contains("[2] going to the kitchen is necessary for finding the thermometer"));
        assert!(!out.contains("{subtask}"));
    }

    #[test]
    fn missing_placeholder_is_named() {
        let mut ctx = exec_ctx();
        ctx.remove("history");
        let err = TemplateSet::builtin().render(EXECUTOR_ACT, &ctx).unwrap_err();
        assert_eq!(err, TemplateError::Unbound { template: EXECUTOR_ACT.into(), placeholder: "history".into() });
    }

    #[test]
    fn rendering_is_deterministic_and_ignores_extra_keys() {
        let set = TemplateSet::builtin();
        let mut ctx = exec_ctx();
        ctx.insert("unused", "zzz".into());
        let a = set.render(EXECUTOR_ACT, &ctx).unwrap();
        let b = set.render(EXECUTOR_ACT, &ctx).unwrap();
        assert_eq!(a, b);
        assert!(!a.contains("zzz"));
    }

    #[test]
    fn unknown_template_and_literal_braces() {
        assert!(matches!(TemplateSet::builtin().render("nope", &Context::new()), Err(TemplateError::UnknownTemplate(_))));
        let out = render_text("{ x } {Y} {a}", &[("a", String::from("1"))].into_iter().collect()).unwrap();
        assert_eq!(out, "{ x } {Y} 1");
    }

    #[test]
    fn substituted_values_are_not_rescanned() {
        let ctx: Context<'_> = [("a", String::from("{b}"))].into_iter().collect();
        assert_eq!(render_text("{a}", &ctx).unwrap(), "{b}");
    }
}
