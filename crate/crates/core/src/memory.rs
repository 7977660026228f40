//! Per-task memory: causal insights, the suggested strategy, and the
//! Memory-Generator that rebuilds both after every attempt.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::action::normalize;
use crate::backend::Role;
use crate::prompting::{labeled, parse_id_list, render_insights, strip_label, RoleCtx, RoleError, NO_INSIGHTS};
use crate::task::TaskSpec;
use crate::template::{self, Context};
use crate::trace::TrialTrace;

/// Schema version written into every memory document.
pub const MEMORY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InsightId(pub u32);

impl fmt::Display for InsightId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Necessary,
    MayContribute,
    MayNotContribute,
}

/// Hedge attached to an insight. Only polarity feeds the Evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Confidence {
    May,
    Should,
    Necessary,
}

/// Connective phrases, longest first so `may not contribute to` wins over
/// `contribute to`.
const CONNECTIVES: [(&str, Polarity, Confidence); 13] = [
    ("should not contribute to", Polarity::MayNotContribute, Confidence::Should),
    ("does not contribute to", Polarity::MayNotContribute, Confidence::Necessary),
    ("may not contribute to", Polarity::MayNotContribute, Confidence::May),
    ("should be necessary for", Polarity::Necessary, Confidence::Should),
    ("should be necessary to", Polarity::Necessary, Confidence::Should),
    ("may be necessary for", Polarity::Necessary, Confidence::May),
    ("may be necessary to", Polarity::Necessary, Confidence::May),
    ("should contribute to", Polarity::MayContribute, Confidence::Should),
    ("is necessary for", Polarity::Necessary, Confidence::Necessary),
    ("is necessary to", Polarity::Necessary, Confidence::Necessary),
    ("may contribute to", Polarity::MayContribute, Confidence::May),
    ("contributes to", Polarity::MayContribute, Confidence::Necessary),
    ("does contribute to", Polarity::MayContribute, Confidence::Necessary),
];

fn connective(polarity: Polarity, confidence: Confidence) -> &'static str {
    match (polarity, confidence) {
        (Polarity::Necessary, Confidence::Necessary) => "is necessary for",
        (Polarity::Necessary, Confidence::Should) => "should be necessary for",
        (Polarity::Necessary, Confidence::May) => "may be necessary for",
        (Polarity::MayContribute, Confidence::Necessary) => "contributes to",
        (Polarity::MayContribute, Confidence::Should) => "should contribute to",
        (Polarity::MayContribute, Confidence::May) => "may contribute to",
        (Polarity::MayNotContribute, Confidence::Necessary) => "does not contribute to",
        (Polarity::MayNotContribute, Confidence::Should) => "should not contribute to",
        (Polarity::MayNotContribute, Confidence::May) => "may not contribute to",
    }
}

/// A causal abstraction "X <relation> Y" learned from a trace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Insight {
    pub id: InsightId,
    pub antecedent: String,
    pub consequent: String,
    pub polarity: Polarity,
    pub confidence: Confidence,
    pub source_attempt: u32,
}

impl Insight {
    pub fn sentence(&self) -> String {
        alloc::format!("{} {} {}", self.antecedent, connective(self.polarity, self.confidence), self.consequent)
    }

    /// Dedup key: normalized antecedent and consequent.
    pub fn pair_key(&self) -> (String, String) {
        (normalize(&self.antecedent), normalize(&self.consequent))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("not a causal insight: \"{0}\"")]
pub struct InsightParseError(pub String);

/// Parses one "X <relation> Y" sentence. The id is left at 0 for the merge
/// to assign.
pub fn parse_insight(sentence: &str, source_attempt: u32) -> Result<Insight, InsightParseError> {
    let text = sentence.trim().trim_end_matches(['.', ';']).trim();
    let lower = text.to_lowercase();
    let fail = || InsightParseError(text.to_owned());
    for (phrase, polarity, confidence) in CONNECTIVES {
        let needle = alloc::format!(" {phrase} ");
        if let Some(pos) = lower.find(&needle) {
            // lowercasing can change byte lengths outside ASCII; require a clean split
            if lower.len() != text.len() {
                return Err(fail());
            }
            let antecedent = text[..pos].trim().trim_matches('"');
            let consequent = text[pos + needle.len()..].trim().trim_matches('"');
            if antecedent.is_empty() || consequent.is_empty() {
                return Err(fail());
            }
            return Ok(Insight {
                id: InsightId(0),
                antecedent: antecedent.to_owned(),
                consequent: consequent.to_owned(),
                polarity,
                confidence,
                source_attempt,
            });
        }
    }
    Err(fail())
}

/// Evaluator-facing projection of a "may not contribute" insight.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NegativeRule {
    pub id: InsightId,
    pub antecedent: String,
    pub consequent: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Milestone {
    pub text: String,
    /// Source-trace step indices this milestone abstracts.
    pub steps: Vec<u32>,
}

/// Ordered milestone summary of the most recent rewarded trajectory.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Strategy {
    pub milestones: Vec<Milestone>,
    pub source_attempt: u32,
    /// Steps kept before abstraction: every rewarded step plus the ones the
    /// model judged essential.
    pub retained_steps: Vec<u32>,
    pub raw_summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MemoryStore {
    pub task_id: String,
    pub attempt_count: u32,
    pub insights: Vec<Insight>,
    pub strategy: Option<Strategy>,
}

impl MemoryStore {
    pub fn empty(task_id: &str) -> Self {
        MemoryStore { task_id: task_id.to_owned(), attempt_count: 0, insights: Vec::new(), strategy: None }
    }

    pub fn insight(&self, id: InsightId) -> Option<&Insight> {
        self.insights.iter().find(|i| i.id == id)
    }

    pub fn next_id(&self) -> InsightId {
        next_id(&self.insights)
    }
}

fn next_id(insights: &[Insight]) -> InsightId {
    InsightId(insights.iter().map(|i| i.id.0).max().map_or(1, |m| m + 1))
}

/// Unions `new` into `old`.
///
/// Entries with the same normalized (X, Y) and polarity are duplicates and
/// keep the old entry. Same (X, Y) with a different polarity replaces the old
/// entry's polarity, confidence, and attempt in place. Genuinely new entries
/// are appended with fresh ids; ids carried by `new` are ignored.
pub fn merge_insights(old: &[Insight], new: &[Insight]) -> Vec<Insight> {
    let mut out = old.to_vec();
    for incoming in new {
        let key = incoming.pair_key();
        match out.iter_mut().find(|i| i.pair_key() == key) {
            Some(existing) if existing.polarity == incoming.polarity => {}
            Some(existing) => {
                existing.polarity = incoming.polarity;
                existing.confidence = incoming.confidence;
                existing.source_attempt = incoming.source_attempt;
            }
            None => {
                let id = next_id(&out);
                out.push(Insight { id, ..incoming.clone() });
            }
        }
    }
    out
}

/// Projects exactly the "may not contribute" insights, in store order.
pub fn extract_negative_rules(store: &MemoryStore) -> Vec<NegativeRule> {
    store
        .insights
        .iter()
        .filter(|i| i.polarity == Polarity::MayNotContribute)
        .map(|i| NegativeRule {
            id: i.id,
            antecedent: i.antecedent.clone(),
            consequent: i.consequent.clone(),
            text: alloc::format!("{} does NOT contribute to {}", i.antecedent, i.consequent),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MemoryFormatError {
    #[error("memory document version {found:?} is not supported (expected {MEMORY_SCHEMA_VERSION}); migrate the file first")]
    Version { found: Option<u64> },
    #[error("malformed memory document: {0}")]
    Malformed(String),
    #[error("memory document is for task \"{found}\", expected \"{expected}\"")]
    TaskMismatch { expected: String, found: String },
}

#[derive(Serialize, Deserialize)]
struct MemoryDocument {
    version: u32,
    #[serde(flatten)]
    store: MemoryStore,
}

/// Serializes a store as a versioned structured-text document.
pub fn to_document(store: &MemoryStore) -> String {
    let doc = MemoryDocument { version: MEMORY_SCHEMA_VERSION, store: store.clone() };
    let mut text = serde_json::to_string_pretty(&doc).expect("memory store serializes");
    text.push('\n');
    text
}

/// Parses a memory document. Blank input yields an empty store for `task_id`.
pub fn from_document(text: &str, task_id: &str) -> Result<MemoryStore, MemoryFormatError> {
    if text.trim().is_empty() {
        return Ok(MemoryStore::empty(task_id));
    }
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| MemoryFormatError::Malformed(alloc::format!("{e}")))?;
    let found = value.get("version").and_then(serde_json::Value::as_u64);
    if found != Some(u64::from(MEMORY_SCHEMA_VERSION)) {
        return Err(MemoryFormatError::Version { found });
    }
    let doc: MemoryDocument = serde_json::from_value(value).map_err(|e| MemoryFormatError::Malformed(alloc::format!("{e}")))?;
    if doc.store.task_id != task_id {
        return Err(MemoryFormatError::TaskMismatch { expected: task_id.to_owned(), found: doc.store.task_id });
    }
    Ok(doc.store)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReflectionParseError {
    #[error("reflection has no INSIGHT lines and no explicit \"INSIGHTS: none\"")]
    NoInsights,
}

/// Parsed reflection: the insights plus the lines that were dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reflection {
    pub insights: Vec<Insight>,
    pub rejected_lines: Vec<String>,
}

pub fn parse_reflection(text: &str, source_attempt: u32) -> Result<Reflection, ReflectionParseError> {
    let mut insights = Vec::new();
    let mut rejected_lines = Vec::new();
    let mut explicit_none = false;
    for line in text.lines() {
        if let Some(body) = strip_label(line, "INSIGHT") {
            match parse_insight(body, source_attempt) {
                Ok(i) => insights.push(i),
                Err(_) => rejected_lines.push(body.to_owned()),
            }
        } else if let Some(body) = strip_label(line, "INSIGHTS") {
            explicit_none |= body.eq_ignore_ascii_case("none");
        }
    }
    if insights.is_empty() && !explicit_none {
        return Err(ReflectionParseError::NoInsights);
    }
    Ok(Reflection { insights, rejected_lines })
}

/// Parses `MILESTONE: text [1, 4]` lines. Milestones without step references
/// are returned with empty `steps`.
pub fn parse_milestones(text: &str) -> Vec<Milestone> {
    let mut out = Vec::new();
    for line in text.lines() {
        let Some(body) = strip_label(line, "MILESTONE") else { continue };
        let (text, steps) = match body.rfind('[') {
            Some(open) if body.trim_end().ends_with(']') => {
                let ids = parse_id_list(&body[open..]).unwrap_or_default();
                (body[..open].trim(), ids)
            }
            _ => (body, Vec::new()),
        };
        if !text.is_empty() {
            out.push(Milestone { text: text.to_owned(), steps });
        }
    }
    out
}

/// What the Memory-Generator produced, with its warnings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryUpdate {
    pub store: MemoryStore,
    pub warnings: Vec<String>,
}

/// Reflects on a finished trial and rebuilds the store.
///
/// New insights are merged into the prior list. The strategy is rebuilt from
/// the trace: every step with a strict reward increase is kept, the model
/// names which other steps were essential, and the kept sequence is abstracted
/// into milestones. A trial without any reward keeps the prior strategy.
pub fn generate_memory(ctx: &mut RoleCtx<'_>, task: &TaskSpec, prior: &MemoryStore, trace: &TrialTrace) -> Result<MemoryUpdate, RoleError> {
    let mut warnings = Vec::new();
    let attempt = trace.attempt;

    let mut c = Context::new();
    c.insert("task", task.description.clone());
    c.insert("reward", alloc::format!("{}", trace.final_reward));
    c.insert("insights", render_insights(&prior.insights, NO_INSIGHTS));
    c.insert("trace", render_full_trace(trace, None));
    let response = ctx.ask(Role::Memory, template::MEMORY_REFLECT, &c)?;
    let reflection = match parse_reflection(&response, attempt) {
        Ok(r) => r,
        Err(e) => {
            log::warn!("memory reflection unusable ({e}); keeping prior memory");
            warnings.push(alloc::format!("{e}; prior memory kept"));
            return Ok(MemoryUpdate { store: prior.clone(), warnings });
        }
    };
    for line in &reflection.rejected_lines {
        warnings.push(alloc::format!("dropped unparseable insight: {line}"));
    }

    let insights = merge_insights(&prior.insights, &reflection.insights);
    let strategy = match build_strategy(ctx, task, trace, &mut warnings)? {
        Some(s) => Some(s),
        None => prior.strategy.clone(),
    };
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(MemoryUpdate { store: MemoryStore { task_id: prior.task_id.clone(), attempt_count: attempt.max(prior.attempt_count), insights, strategy }, warnings })
}

fn build_strategy(ctx: &mut RoleCtx<'_>, task: &TaskSpec, trace: &TrialTrace, warnings: &mut Vec<String>) -> Result<Option<Strategy>, RoleError> {
    let rewarded = trace.rewarded_steps();
    if rewarded.is_empty() {
        return Ok(None);
    }
    let rewarded_set: BTreeSet<u32> = rewarded.iter().copied().collect();
    let remaining: BTreeSet<u32> = trace.steps.iter().map(|s| s.index).filter(|i| !rewarded_set.contains(i)).collect();

    let mut essential = BTreeSet::new();
    if !remaining.is_empty() {
        let mut c = Context::new();
        c.insert("task", task.description.clone());
        c.insert("rewarded", render_full_trace(trace, Some(&rewarded_set)));
        c.insert("remaining", render_full_trace(trace, Some(&remaining)));
        let response = ctx.ask(Role::Memory, template::MEMORY_ESSENTIAL, &c)?;
        match labeled(&response, "ESSENTIAL").map(parse_id_list) {
            Some(Ok(ids)) => {
                for id in ids {
                    if remaining.contains(&id) {
                        essential.insert(id);
                    } else {
                        warnings.push(alloc::format!("essential step {id} is not a remaining step of the trace"));
                    }
                }
            }
            _ => warnings.push("essential-step answer unusable; keeping rewarded steps only".to_owned()),
        }
    }
    let retained: BTreeSet<u32> = rewarded_set.union(&essential).copied().collect();

    let mut c = Context::new();
    c.insert("task", task.description.clone());
    c.insert("retained", render_full_trace(trace, Some(&retained)));
    let response = ctx.ask(Role::Memory, template::MEMORY_ABSTRACT, &c)?;
    let mut milestones = Vec::new();
    for m in parse_milestones(&response) {
        if m.steps.is_empty() || !m.steps.iter().all(|s| retained.contains(s)) {
            warnings.push(alloc::format!("dropped milestone \"{}\" with step references outside the kept steps", m.text));
        } else {
            milestones.push(m);
        }
    }
    if milestones.is_empty() {
        warnings.push("no usable milestones; falling back to rewarded actions".to_owned());
        milestones = trace
            .steps
            .iter()
            .filter(|s| rewarded_set.contains(&s.index))
            .map(|s| Milestone { text: s.action.canonical(), steps: alloc::vec![s.index] })
            .collect();
    }
    Ok(Some(Strategy { milestones, source_attempt: trace.attempt, retained_steps: retained.into_iter().collect(), raw_summary: response }))
}

/// Full trace including rationales and scores; `only` restricts to a step set.
fn render_full_trace(trace: &TrialTrace, only: Option<&BTreeSet<u32>>) -> String {
    let mut out = String::new();
    for s in trace.steps.iter().filter(|s| only.is_none_or(|set| set.contains(&s.index))) {
        out.push_str(&alloc::format!(
            "{}. think: {} | action: {} | observation: {} | score: {}\n",
            s.index,
            if s.rationale.is_empty() { "-" } else { &s.rationale },
            s.action.raw,
            s.observation.replace('\n', " "),
            s.reward
        ));
    }
    if out.is_empty() {
        out.push_str("(no steps)");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ins(x: &str, y: &str, p: Polarity) -> Insight {
        Insight { id: InsightId(0), antecedent: x.into(), consequent: y.into(), polarity: p, confidence: Confidence::May, source_attempt: 1 }
    }

    #[test]
    fn sentences_round_trip_through_the_parser() {
        for (_, p, c) in CONNECTIVES {
            let i = Insight { confidence: c, ..ins("going to the kitchen", "finding the thermometer", p) };
            let parsed = parse_insight(&i.sentence(), 1).unwrap();
            assert_eq!((parsed.polarity, parsed.confidence), (p, c));
            assert_eq!(parsed.antecedent, "going to the kitchen");
        }
        assert!(parse_insight("the kitchen is nice", 1).is_err());
        let neg = parse_insight("Focusing on substance B first does NOT contribute to measuring the temperature.", 2).unwrap();
        assert_eq!(neg.polarity, Polarity::MayNotContribute);
        assert_eq!(neg.consequent, "measuring the temperature");
    }

    #[test]
    fn merge_appends_with_fresh_ids() {
        let merged = merge_insights(&[], &[ins("a", "b", Polarity::Necessary)]);
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].id, InsightId(1));
    }

    #[test]
    fn merge_dedups_normalized_triples() {
        let old = merge_insights(&[], &[ins("Go to  Kitchen", "find B", Polarity::Necessary)]);
        let merged = merge_insights(&old, &[ins("go to kitchen ", "FIND b", Polarity::Necessary)]);
        assert_eq!(merged, old);
    }

    #[test]
    fn merge_conflict_takes_newer_polarity_in_place() {
        let old = merge_insights(&[], &[ins("x", "y", Polarity::Necessary), ins("p", "q", Polarity::MayContribute)]);
        let newer = Insight { source_attempt: 3, ..ins("x", "y", Polarity::MayNotContribute) };
        let merged = merge_insights(&old, &[newer]);
        assert_eq!(merged.len(), 2);
        assert_eq!(merged[0].id, InsightId(1));
        assert_eq!(merged[0].polarity, Polarity::MayNotContribute);
        assert_eq!(merged[0].source_attempt, 3);
    }

    #[test]
    fn negative_projection() {
        let mut store = MemoryStore::empty("t");
        assert!(extract_negative_rules(&store).is_empty());
        store.insights =
            merge_insights(&[], &[ins("a", "b", Polarity::Necessary), ins("c", "d", Polarity::MayNotContribute), ins("e", "f", Polarity::MayContribute)]);
        let rules = extract_negative_rules(&store);
        assert_eq!(rules.len(), 1);
        assert_eq!(rules[0].id, InsightId(2));
        assert_eq!(rules[0].text, "c does NOT contribute to d");
        assert_eq!(extract_negative_rules(&store), rules);
    }

    #[test]
    fn document_round_trip_and_versioning() {
        let mut store = MemoryStore::empty("temp-measure");
        store.insights = merge_insights(&[], &[ins("a", "b", Polarity::Necessary)]);
        store.attempt_count = 1;
        store.strategy = Some(Strategy {
            milestones: alloc::vec![Milestone { text: "get the thermometer".into(), steps: alloc::vec![3] }],
            source_attempt: 1,
            retained_steps: alloc::vec![3],
            raw_summary: "MILESTONE: get the thermometer [3]".into(),
        });
        let doc = to_document(&store);
        assert!(doc.contains("\"version\": 1"));
        let back = from_document(&doc, "temp-measure").unwrap();
        assert_eq!(back, store);
        assert_eq!(to_document(&back), doc);

        assert_eq!(from_document("", "t").unwrap(), MemoryStore::empty("t"));
        let bumped = doc.replace("\"version\": 1", "\"version\": 7");
        assert_eq!(from_document(&bumped, "temp-measure"), Err(MemoryFormatError::Version { found: Some(7) }));
        assert!(matches!(from_document(&doc, "other"), Err(MemoryFormatError::TaskMismatch { .. })));
    }

    #[test]
    fn reflection_parsing() {
        let r = parse_reflection(
            "INSIGHT: going to the kitchen is necessary for finding the thermometer\n- INSIGHT: blah\nINSIGHT: waiting may not contribute to the task",
            2,
        )
        .unwrap();
        assert_eq!(r.insights.len(), 2);
        assert_eq!(r.rejected_lines, ["blah"]);
        assert!(parse_reflection("INSIGHTS: none", 1).unwrap().insights.is_empty());
        assert_eq!(parse_reflection("I learned a lot", 1), Err(ReflectionParseError::NoInsights));
    }

    #[test]
    fn milestone_parsing() {
        let ms = parse_milestones("MILESTONE: find the thermometer [2, 5]\nMILESTONE: wander\nnoise");
        assert_eq!(ms.len(), 2);
        assert_eq!(ms[0].steps, [2, 5]);
        assert!(ms[1].steps.is_empty());
    }
}
