use alloc::string::String;

use serde::{Deserialize, Serialize};

/// Short tasks get 37 environment steps, long tasks 70.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Short,
    Long,
}

impl TaskKind {
    pub const fn step_budget(self) -> u32 {
        match self {
            TaskKind::Short => 37,
            TaskKind::Long => 70,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TaskKind::Short => "S",
            TaskKind::Long => "L",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: String,
    /// The task prompt handed to the Planner.
    pub description: String,
    pub kind: TaskKind,
    pub variation_seed: u64,
}

impl TaskSpec {
    pub fn budget(&self) -> u32 {
        self.kind.step_budget()
    }
}
