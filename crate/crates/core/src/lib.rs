//! Stepwise agent loop for text environments.
//!
//! A Planner proposes subtasks, an Executor turns them into actions, an
//! Evaluator gates each action against rules learned in earlier attempts,
//! and a Memory-Generator distills every finished trial into insights and a
//! milestone strategy for the next one. A deterministic text world is
//! included for offline runs.

#![no_std]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod action;
pub mod agent;
pub mod backend;
pub mod env;
pub mod evaluator;
pub mod executor;
pub mod memory;
pub mod planner;
pub mod prompting;
pub mod task;
pub mod template;
pub mod trace;
pub mod world;

pub use action::{parse_command, ActionCommand, ActionVerb};
pub use agent::{Agent, AttemptResult, AttemptStatus, RunConfig, RunError, TaskResult};
pub use backend::{CompletionBackend, CompletionRequest, Role};
pub use env::{Environment, StepOutcome};
pub use memory::MemoryStore;
pub use task::{TaskKind, TaskSpec};
pub use trace::TrialTrace;
