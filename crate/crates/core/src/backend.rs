//! Completion backends: the trait the agent roles call, a scripted
//! deterministic backend, journal recording, and journal replay.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Planner,
    Executor,
    Evaluator,
    Memory,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Planner, Role::Executor, Role::Evaluator, Role::Memory];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Planner => "planner",
            Role::Executor => "executor",
            Role::Evaluator => "evaluator",
            Role::Memory => "memory",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where in a run a completion was requested.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Coordinates {
    pub attempt: u32,
    /// Index of the step being decided (or the last step, for memory calls).
    pub step: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub role: Role,
    pub template: String,
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f32,
    pub coords: Coordinates,
}

impl CompletionRequest {
    pub fn new(role: Role, template: &str, prompt: String, coords: Coordinates) -> Self {
        CompletionRequest { role, template: template.to_owned(), prompt, max_tokens: 512, temperature: 0.0, coords }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("script exhausted for {role} invocation {index}")]
    ScriptExhausted { role: Role, index: u32 },
    #[error("replay journal exhausted for {role}")]
    ReplayExhausted { role: Role },
    #[error("replay prompt mismatch for {role} invocation {index}")]
    ReplayMismatch { role: Role, index: u32 },
    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("no backend configured for {0}")]
    NoBackend(Role),
    #[error("replayed failure: {0}")]
    Replayed(String),
    #[error("empty prompt for {0}")]
    EmptyPrompt(Role),
}

pub trait CompletionBackend {
    fn complete(&mut self, request: &CompletionRequest) -> Result<String, BackendError>;
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for &mut B {
    fn complete(&mut self, request: &CompletionRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for Box<B> {
    fn complete(&mut self, request: &CompletionRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

/// Responses keyed by (role, invocation index), stored as one ordered list
/// per role.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Script {
    #[serde(default)]
    pub planner: Vec<String>,
    #[serde(default)]
    pub executor: Vec<String>,
    #[serde(default)]
    pub evaluator: Vec<String>,
    #[serde(default)]
    pub memory: Vec<String>,
}

impl Script {
    pub fn responses(&self, role: Role) -> &[String] {
        match role {
            Role::Planner => &self.planner,
            Role::Executor => &self.executor,
            Role::Evaluator => &self.evaluator,
            Role::Memory => &self.memory,
        }
    }

    pub fn responses_mut(&mut self, role: Role) -> &mut Vec<String> {
        match role {
            Role::Planner => &mut self.planner,
            Role::Executor => &mut self.executor,
            Role::Evaluator => &mut self.evaluator,
            Role::Memory => &mut self.memory,
        }
    }

    pub fn push(&mut self, role: Role, response: impl Into<String>) -> &mut Self {
        self.responses_mut(role).push(response.into());
        self
    }

    pub fn get(&self, role: Role, index: u32) -> Option<&str> {
        self.responses(role).get(index as usize).map(String::as_str)
    }

    /// Appends every role list of `other` after this script's.
    pub fn extend(&mut self, other: &Script) {
        for role in Role::ALL {
            self.responses_mut(role).extend_from_slice(other.responses(role));
        }
    }
}

/// Deterministic backend answering from a [`Script`]; cursors are owned by
/// the instance, so each run gets its own.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    script: Script,
    cursors: BTreeMap<Role, u32>,
}

impl ScriptedBackend {
    pub fn new(script: Script) -> Self {
        ScriptedBackend { script, cursors: BTreeMap::new() }
    }

    /// Number of responses consumed for `role`.
    pub fn consumed(&self, role: Role) -> u32 {
        self.cursors.get(&role).copied().unwrap_or(0)
    }
}

impl CompletionBackend for ScriptedBackend {
    fn complete(&mut self, request: &CompletionRequest) -> Result<String, BackendError> {
        let cursor = self.cursors.entry(request.role).or_insert(0);
        let index = *cursor;
        let response = self.script.get(request.role, index).ok_or(BackendError::ScriptExhausted { role: request.role, index })?;
        *cursor += 1;
        Ok(response.to_owned())
    }
}

/// One completion call as recorded in the prompt journal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub seq: u64,
    pub role: Role,
    pub attempt: u32,
    pub step: u32,
    /// Per-role call counter.
    pub invocation: u32,
    pub template: String,
    pub prompt: String,
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Wraps a backend and records every call, successful or not.
#[derive(Debug)]
pub struct Journaled<B> {
    inner: B,
    entries: Vec<JournalEntry>,
    invocations: BTreeMap<Role, u32>,
}

impl<B> Journaled<B> {
    pub fn new(inner: B) -> Self {
        Journaled { inner, entries: Vec::new(), invocations: BTreeMap::new() }
    }

    pub fn entries(&self) -> &[JournalEntry] {
        &self.entries
    }

    pub fn into_parts(self) -> (B, Vec<JournalEntry>) {
        (self.inner, self.entries)
    }
}

impl<B: CompletionBackend> CompletionBackend for Journaled<B> {
    fn complete(&mut self, request: &CompletionRequest) -> Result<String, BackendError> {
        let invocation = self.invocations.entry(request.role).or_insert(0);
        let mut entry = JournalEntry {
            seq: self.entries.len() as u64,
            role: request.role,
            attempt: request.coords.attempt,
            step: request.coords.step,
            invocation: *invocation,
            template: request.template.clone(),
            prompt: request.prompt.clone(),
            response: String::new(),
            error: None,
        };
        *invocation += 1;
        let result = if request.prompt.is_empty() { Err(BackendError::EmptyPrompt(request.role)) } else { self.inner.complete(request) };
        match &result {
            Ok(text) => entry.response = text.clone(),
            Err(err) => entry.error = Some(alloc::format!("{err}")),
        }
        self.entries.push(entry);
        result
    }
}

/// Answers from a previously recorded journal, in per-role order.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    queues: BTreeMap<Role, VecDeque<JournalEntry>>,
    strict_prompts: bool,
}

impl ReplayBackend {
    /// With `strict_prompts`, a prompt that differs from the recorded one is
    /// an error.
    pub fn new(entries: impl IntoIterator<Item = JournalEntry>, strict_prompts: bool) -> Self {
        let mut queues: BTreeMap<Role, VecDeque<JournalEntry>> = BTreeMap::new();
        for e in entries {
            queues.entry(e.role).or_default().push_back(e);
        }
        ReplayBackend { queues, strict_prompts }
    }

    pub fn remaining(&self) -> usize {
        self.queues.values().map(VecDeque::len).sum()
    }
}

impl CompletionBackend for ReplayBackend {
    fn complete(&mut self, request: &CompletionRequest) -> Result<String, BackendError> {
        let entry = self.queues.get_mut(&request.role).and_then(VecDeque::pop_front).ok_or(BackendError::ReplayExhausted { role: request.role })?;
        if self.strict_prompts && entry.prompt != request.prompt {
            return Err(BackendError::ReplayMismatch { role: request.role, index: entry.invocation });
        }
        match entry.error {
            Some(err) => Err(BackendError::Replayed(err)),
            None => Ok(entry.response),
        }
    }
}

/// Dispatches each role to its own backend, falling back to a default.
#[derive(Default)]
pub struct RoleRouter<'a> {
    routes: BTreeMap<Role, Box<dyn CompletionBackend + 'a>>,
    fallback: Option<Box<dyn CompletionBackend + 'a>>,
}

impl<'a> RoleRouter<'a> {
    pub fn new() -> Self {
        RoleRouter { routes: BTreeMap::new(), fallback: None }
    }

    pub fn with_default(mut self, backend: impl CompletionBackend + 'a) -> Self {
        self.fallback = Some(Box::new(backend));
        self
    }

    pub fn route(mut self, role: Role, backend: impl CompletionBackend + 'a) -> Self {
        self.routes.insert(role, Box::new(backend));
        self
    }
}

impl CompletionBackend for RoleRouter<'_> {
    fn complete(&mut self, request: &CompletionRequest) -> Result<String, BackendError> {
        match self.routes.get_mut(&request.role) {
            Some(backend) => backend.complete(request),
            None => self.fallback.as_mut().ok_or(BackendError::NoBackend(request.role))?.complete(request),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(role: Role, prompt: &str) -> CompletionRequest {
        CompletionRequest::new(role, "t", prompt.into(), Coordinates::default())
    }

    #[test]
    fn scripted_lookup_and_exhaustion() {
        let mut script = Script::default();
        script.push(Role::Executor, "ACTION: wait");
        let mut b = ScriptedBackend::new(script);
        assert_eq!(b.complete(&req(Role::Executor, "p")).unwrap(), "ACTION: wait");
        assert_eq!(b.complete(&req(Role::Executor, "p")), Err(BackendError::ScriptExhausted { role: Role::Executor, index: 1 }));
        assert_eq!(b.complete(&req(Role::Planner, "p")), Err(BackendError::ScriptExhausted { role: Role::Planner, index: 0 }));
    }

    #[test]
    fn journal_replays_byte_identically() {
        let mut script = Script::default();
        script.push(Role::Planner, "SUBTASK: a\nINSIGHTS: none").push(Role::Executor, "ACTION: wait");
        script.push(Role::Planner, "SUBTASK: b\nINSIGHTS: [1]");
        let mut rec = Journaled::new(ScriptedBackend::new(script));
        let calls = [(Role::Planner, "p1"), (Role::Executor, "e1"), (Role::Planner, "p2")];
        let original: Vec<_> = calls.iter().map(|(r, p)| rec.complete(&req(*r, p)).unwrap()).collect();
        let (_, entries) = rec.into_parts();
        assert_eq!(entries.len(), 3);
        assert_eq!(entries[2].invocation, 1);

        let mut replay = ReplayBackend::new(entries.clone(), true);
        let replayed: Vec<_> = calls.iter().map(|(r, p)| replay.complete(&req(*r, p)).unwrap()).collect();
        assert_eq!(original, replayed);
        assert_eq!(replay.remaining(), 0);

        let mut strict = ReplayBackend::new(entries, true);
        assert!(matches!(strict.complete(&req(Role::Planner, "other")), Err(BackendError::ReplayMismatch { .. })));
    }

    #[test]
    fn journal_records_failures_too() {
        let mut rec = Journaled::new(ScriptedBackend::new(Script::default()));
        assert!(rec.complete(&req(Role::Memory, "m")).is_err());
        assert!(rec.entries()[0].error.is_some());
        let mut replay = ReplayBackend::new(rec.entries().to_vec(), true);
        assert!(matches!(replay.complete(&req(Role::Memory, "m")), Err(BackendError::Replayed(_))));
    }

    #[test]
    fn router_dispatches_per_role() {
        let mut a = Script::default();
        a.push(Role::Planner, "from a");
        let mut b = Script::default();
        b.push(Role::Planner, "from b");
        let mut router = RoleRouter::new().with_default(ScriptedBackend::new(a)).route(Role::Planner, ScriptedBackend::new(b));
        assert_eq!(router.complete(&req(Role::Planner, "x")).unwrap(), "from b");
        assert!(RoleRouter::new().complete(&req(Role::Planner, "x")).is_err());
    }
}
