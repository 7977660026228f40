//! The 25-verb action grammar shared by the Executor and the simulator.
//!
//! Parsing here is purely syntactic: object phrases stay free strings. The
//! simulator resolves them against the live world when the action is applied.

use alloc::borrow::ToOwned;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Argument shape of a verb.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    /// `look around`, `task`, `inventory`
    None,
    /// `open OBJ`
    One,
    /// `connect OBJ to OBJ`; the first separator is canonical.
    Two(&'static [&'static str]),
    /// `use OBJ [on OBJ]`
    OneOrTwo(&'static [&'static str]),
    /// `wait [DURATION]`
    Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionVerb {
    Open,
    Close,
    Activate,
    Deactivate,
    Connect,
    Disconnect,
    Use,
    LookAround,
    LookAt,
    LookIn,
    Read,
    Move,
    PickUp,
    PutDown,
    Pour,
    Dunk,
    Mix,
    GoTo,
    Teleport,
    Eat,
    Flush,
    FocusOn,
    Wait,
    Task,
    Inventory,
}

impl ActionVerb {
    pub const ALL: [ActionVerb; 25] = [
        ActionVerb::Open,
        ActionVerb::Close,
        ActionVerb::Activate,
        ActionVerb::Deactivate,
        ActionVerb::Connect,
        ActionVerb::Disconnect,
        ActionVerb::Use,
        ActionVerb::LookAround,
        ActionVerb::LookAt,
        ActionVerb::LookIn,
        ActionVerb::Read,
        ActionVerb::Move,
        ActionVerb::PickUp,
        ActionVerb::PutDown,
        ActionVerb::Pour,
        ActionVerb::Dunk,
        ActionVerb::Mix,
        ActionVerb::GoTo,
        ActionVerb::Teleport,
        ActionVerb::Eat,
        ActionVerb::Flush,
        ActionVerb::FocusOn,
        ActionVerb::Wait,
        ActionVerb::Task,
        ActionVerb::Inventory,
    ];

    /// Canonical surface phrase.
    pub fn phrase(self) -> &'static str {
        match self {
            ActionVerb::Open => "open",
            ActionVerb::Close => "close",
            ActionVerb::Activate => "activate",
            ActionVerb::Deactivate => "deactivate",
            ActionVerb::Connect => "connect",
            ActionVerb::Disconnect => "disconnect",
            ActionVerb::Use => "use",
            ActionVerb::LookAround => "look around",
            ActionVerb::LookAt => "look at",
            ActionVerb::LookIn => "look in",
            ActionVerb::Read => "read",
            ActionVerb::Move => "move",
            ActionVerb::PickUp => "pick up",
            ActionVerb::PutDown => "put down",
            ActionVerb::Pour => "pour",
            ActionVerb::Dunk => "dunk",
            ActionVerb::Mix => "mix",
            ActionVerb::GoTo => "go to",
            ActionVerb::Teleport => "teleport to",
            ActionVerb::Eat => "eat",
            ActionVerb::Flush => "flush",
            ActionVerb::FocusOn => "focus on",
            ActionVerb::Wait => "wait",
            ActionVerb::Task => "task",
            ActionVerb::Inventory => "inventory",
        }
    }

    /// Shorter spellings accepted on input.
    fn aliases(self) -> &'static [&'static str] {
        match self {
            ActionVerb::GoTo => &["go"],
            ActionVerb::Teleport => &["teleport"],
            ActionVerb::FocusOn => &["focus"],
            ActionVerb::PickUp => &["take", "get"],
            ActionVerb::PutDown => &["drop"],
            ActionVerb::Inventory => &["inv"],
            _ => &[],
        }
    }

    pub fn arity(self) -> Arity {
        match self {
            ActionVerb::LookAround | ActionVerb::Task | ActionVerb::Inventory => Arity::None,
            ActionVerb::Connect => Arity::Two(&["to", "and", "with"]),
            ActionVerb::Move => Arity::Two(&["to", "into", "in"]),
            ActionVerb::Pour | ActionVerb::Dunk => Arity::Two(&["into", "in"]),
            ActionVerb::Use => Arity::OneOrTwo(&["on"]),
            ActionVerb::Wait => Arity::Duration,
            _ => Arity::One,
        }
    }
}

impl fmt::Display for ActionVerb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.phrase())
    }
}

/// A parsed environment action: verb plus up to two object references.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionCommand {
    pub verb: ActionVerb,
    pub args: Vec<String>,
    /// Normalized input text the command was parsed from.
    pub raw: String,
}

impl ActionCommand {
    /// Builds a command directly; `raw` is set to the canonical rendering.
    pub fn new(verb: ActionVerb, args: &[&str]) -> Self {
        let mut cmd = ActionCommand { verb, args: args.iter().map(|a| normalize(a)).collect(), raw: String::new() };
        cmd.raw = cmd.canonical();
        cmd
    }

    /// The no-op recorded when the Executor never produced a parseable action.
    pub fn noop(raw: &str) -> Self {
        ActionCommand { verb: ActionVerb::Wait, args: Vec::new(), raw: raw.to_owned() }
    }

    /// Renders the command in canonical grammar form.
    pub fn canonical(&self) -> String {
        let mut out = String::from(self.verb.phrase());
        match (self.verb.arity(), self.args.as_slice()) {
            (Arity::Two(seps), [a, b]) | (Arity::OneOrTwo(seps), [a, b]) => {
                out.push(' ');
                out.push_str(a);
                out.push(' ');
                out.push_str(seps[0]);
                out.push(' ');
                out.push_str(b);
            }
            (_, args) => {
                for a in args {
                    out.push(' ');
                    out.push_str(a);
                }
            }
        }
        out
    }
}

impl fmt::Display for ActionCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ActionParseError {
    #[error("empty action")]
    Empty,
    #[error("unknown verb \"{token}\" (nearest verbs: {})", nearest.join(", "))]
    UnknownVerb { token: String, nearest: Vec<&'static str> },
    #[error("{verb} requires two objects")]
    MissingSecondObject { verb: &'static str },
    #[error("{verb} requires an object")]
    MissingObject { verb: &'static str },
    #[error("{verb} takes no arguments, got \"{extra}\"")]
    UnexpectedArguments { verb: &'static str, extra: String },
    #[error("wait duration must be a number, got \"{0}\"")]
    BadDuration(String),
}

/// Lowercases, trims, and collapses internal whitespace.
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        for c in word.chars() {
            out.extend(c.to_lowercase());
        }
    }
    out
}

/// Parses a free-text action against the verb table.
pub fn parse_command(text: &str) -> Result<ActionCommand, ActionParseError> {
    let norm = normalize(text);
    let norm = norm.trim_end_matches(['.', '!']).trim_end().to_owned();
    if norm.is_empty() {
        return Err(ActionParseError::Empty);
    }
    let (verb, rest) = match_verb(&norm).ok_or_else(|| {
        let token = norm.split(' ').next().unwrap_or_default().to_owned();
        ActionParseError::UnknownVerb { nearest: nearest_verbs(&token), token }
    })?;
    let args = split_args(verb, rest)?;
    Ok(ActionCommand { verb, args, raw: norm })
}

fn match_verb(norm: &str) -> Option<(ActionVerb, &str)> {
    // `wait1`-style fused durations
    if let Some(d) = norm.strip_prefix("wait") {
        if !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()) {
            return Some((ActionVerb::Wait, d));
        }
    }
    let mut best: Option<(ActionVerb, usize)> = None;
    for verb in ActionVerb::ALL {
        for phrase in core::iter::once(verb.phrase()).chain(verb.aliases().iter().copied()) {
            let on_boundary = norm.len() == phrase.len() || norm.as_bytes().get(phrase.len()) == Some(&b' ');
            if norm.starts_with(phrase) && on_boundary && best.is_none_or(|(_, len)| phrase.len() > len) {
                best = Some((verb, phrase.len()));
            }
        }
    }
    best.map(|(verb, len)| (verb, norm[len..].trim_start()))
}

fn split_args(verb: ActionVerb, rest: &str) -> Result<Vec<String>, ActionParseError> {
    let name = verb.phrase();
    match verb.arity() {
        Arity::None if rest.is_empty() => Ok(Vec::new()),
        Arity::None => Err(ActionParseError::UnexpectedArguments { verb: name, extra: rest.to_owned() }),
        Arity::Duration if rest.is_empty() => Ok(Vec::new()),
        Arity::Duration if rest.bytes().all(|b| b.is_ascii_digit()) => Ok(alloc::vec![rest.to_owned()]),
        Arity::Duration => Err(ActionParseError::BadDuration(rest.to_owned())),
        _ if rest.is_empty() => Err(match verb.arity() {
            Arity::Two(_) => ActionParseError::MissingSecondObject { verb: name },
            _ => ActionParseError::MissingObject { verb: name },
        }),
        Arity::One => Ok(alloc::vec![rest.to_owned()]),
        Arity::Two(seps) => match split_on(rest, seps) {
            Some((a, b)) => Ok(alloc::vec![a, b]),
            None => Err(ActionParseError::MissingSecondObject { verb: name }),
        },
        Arity::OneOrTwo(seps) => Ok(match split_on(rest, seps) {
            Some((a, b)) => alloc::vec![a, b],
            None => alloc::vec![rest.to_owned()],
        }),
    }
}

fn split_on(rest: &str, seps: &[&str]) -> Option<(String, String)> {
    for sep in seps {
        let needle = alloc::format!(" {sep} ");
        if let Some(pos) = rest.find(&needle) {
            let (a, b) = (rest[..pos].trim(), rest[pos + needle.len()..].trim());
            if !a.is_empty() && !b.is_empty() {
                return Some((a.to_owned(), b.to_owned()));
            }
        }
    }
    None
}

fn nearest_verbs(token: &str) -> Vec<&'static str> {
    let mut scored: Vec<(usize, &'static str)> = ActionVerb::ALL
        .iter()
        .map(|v| {
            let head = v.phrase().split(' ').next().unwrap_or_default();
            (edit_distance(token, head), v.phrase())
        })
        .collect();
    scored.sort();
    scored.into_iter().take(3).map(|(_, p)| p).collect()
}

pub(crate) fn edit_distance(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.chars().enumerate() {
        let mut cur = alloc::vec![i + 1; b.len() + 1];
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != *cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}
