//! Memory laws: merge idempotence, dedup by normalized pair, negative-rule
//! projection, and byte-identical persistence.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use step_core::memory::{
    extract_negative_rules, from_document, merge_insights, to_document, Confidence, Insight, InsightId, MemoryStore, Milestone, Polarity, Strategy as Plan,
};

use super::runner;

const ANTECEDENTS: [&str; 6] =
    ["going to the kitchen", "focusing on the thermometer", "opening the fridge", "looking at substance b", "picking up the red box", "waiting"];
const CONSEQUENTS: [&str; 3] = ["the task", "measuring the temperature", "finding the thermometer"];

/// A phrase with random letter case and padding, so that distinct strings
/// share one normalized form.
fn variant(pool: &'static [&'static str]) -> impl Strategy<Value = String> {
    (0..pool.len(), proptest::collection::vec(any::<bool>(), 32), 0usize..3, any::<bool>()).prop_map(move |(i, upper, pad, double)| {
        let mut s: String = pool[i].chars().zip(upper.iter().cycle()).map(|(c, u)| if *u { c.to_ascii_uppercase() } else { c }).collect();
        if double {
            s = s.replace(' ', "  ");
        }
        format!("{}{s}{}", " ".repeat(pad), " ".repeat(2 - pad))
    })
}

fn polarity() -> impl Strategy<Value = Polarity> {
    prop_oneof![Just(Polarity::Necessary), Just(Polarity::MayContribute), Just(Polarity::MayNotContribute)]
}

fn confidence() -> impl Strategy<Value = Confidence> {
    prop_oneof![Just(Confidence::May), Just(Confidence::Should), Just(Confidence::Necessary)]
}

pub fn insight() -> impl Strategy<Value = Insight> {
    (variant(&ANTECEDENTS), variant(&CONSEQUENTS), polarity(), confidence(), 0u32..6, 0u32..40).prop_map(|(a, c, polarity, confidence, attempt, id)| Insight {
        id: InsightId(id),
        antecedent: a,
        consequent: c,
        polarity,
        confidence,
        source_attempt: attempt,
    })
}

fn strategy_text() -> impl Strategy<Value = Option<Plan>> {
    proptest::option::of(
        (
            proptest::collection::vec(("\\PC{0,30}", proptest::collection::vec(1u32..70, 0..5)), 0..4),
            0u32..6,
            proptest::collection::vec(1u32..70, 0..6),
            "\\PC{0,40}",
        )
            .prop_map(|(ms, source_attempt, retained_steps, raw_summary)| Plan {
                milestones: ms.into_iter().map(|(text, steps)| Milestone { text, steps }).collect(),
                source_attempt,
                retained_steps,
                raw_summary,
            }),
    )
}

/// A well-formed store: insights merged from scratch, so ids are unique.
pub fn store() -> impl Strategy<Value = MemoryStore> {
    ("[a-z][a-z0-9-]{0,12}", 0u32..10, proptest::collection::vec(insight(), 0..14), strategy_text())
        .prop_map(|(task_id, attempt_count, raw, strategy)| MemoryStore { task_id, attempt_count, insights: merge_insights(&[], &raw), strategy })
}

fn norm(s: &str) -> String {
    s.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}

fn key(i: &Insight) -> (String, String) {
    (norm(&i.antecedent), norm(&i.consequent))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

/// Merging the same batch twice changes nothing the second time, and a
/// store merged with itself is unchanged.
pub fn merge_idempotence(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(store(), proptest::collection::vec(insight(), 0..10)), |(s, new)| {
            let once = merge_insights(&s.insights, &new);
            let twice = merge_insights(&once, &new);
            ensure(once == twice, || format!("second merge changed the store:\n{once:?}\n{twice:?}"))?;
            ensure(merge_insights(&s.insights, &s.insights) == s.insights, || "self-merge changed the store".into())
        })
        .map_err(|e| e.to_string())
}

/// The merged list has one entry per normalized pair, carrying the polarity
/// of the latest statement about that pair; old ids are kept and new ones
/// are fresh.
pub fn dedup_by_normalized_pair(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(store(), proptest::collection::vec(insight(), 0..10)), |(s, new)| {
            let merged = merge_insights(&s.insights, &new);
            let mut expected: BTreeMap<(String, String), Polarity> = BTreeMap::new();
            for i in s.insights.iter().chain(&new) {
                expected.insert(key(i), i.polarity);
            }
            let got: BTreeMap<(String, String), Polarity> = merged.iter().map(|i| (key(i), i.polarity)).collect();
            ensure(got.len() == merged.len(), || format!("duplicate normalized pairs in {merged:?}"))?;
            ensure(got == expected, || format!("pairs or polarities differ:\n got {got:?}\n want {expected:?}"))?;
            for (old, kept) in s.insights.iter().zip(&merged) {
                ensure(old.id == kept.id && key(old) == key(kept), || format!("old entry {old:?} moved or renumbered"))?;
            }
            let ids: BTreeSet<u32> = merged.iter().map(|i| i.id.0).collect();
            ensure(ids.len() == merged.len(), || format!("duplicate ids in {merged:?}"))?;
            let old_max = s.insights.iter().map(|i| i.id.0).max().unwrap_or(0);
            ensure(merged[s.insights.len()..].iter().all(|i| i.id.0 > old_max), || "a new entry reused an old id".into())
        })
        .map_err(|e| e.to_string())
}

/// Negative rules are exactly the "may not contribute" insights, in order.
pub fn negative_rule_projection(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&store(), |s| {
            let rules = extract_negative_rules(&s);
            let expected: Vec<InsightId> = s.insights.iter().filter(|i| i.polarity == Polarity::MayNotContribute).map(|i| i.id).collect();
            let got: Vec<InsightId> = rules.iter().map(|r| r.id).collect();
            ensure(got == expected, || format!("rule ids {got:?}, want {expected:?}"))?;
            for r in &rules {
                let source = s.insight(r.id).expect("rule id exists");
                ensure(r.antecedent == source.antecedent && r.consequent == source.consequent, || format!("rule {r:?} does not match {source:?}"))?;
                ensure(r.text.contains(source.antecedent.as_str()) && r.text.contains(source.consequent.as_str()), || {
                    format!("rule text {:?} lost its terms", r.text)
                })?;
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Save, load, and save again gives the same store and the same bytes.
pub fn persistence_round_trip(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&store(), |s| {
            let doc = to_document(&s);
            let loaded = from_document(&doc, &s.task_id).map_err(|e| TestCaseError::fail(e.to_string()))?;
            ensure(loaded == s, || format!("loaded store differs:\n{loaded:?}\n{s:?}"))?;
            ensure(to_document(&loaded) == doc, || "second save is not byte-identical".into())
        })
        .map_err(|e| e.to_string())
}
