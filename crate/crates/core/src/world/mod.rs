//! Deterministic text world: definitions, runtime state, and the linter.

mod lint;
mod sim;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::task::{TaskKind, TaskSpec};

pub use lint::{lint_world, LintError, LintProblem, LintReport, SEARCH_STATE_LIMIT};
pub use sim::{Place, TextWorld, WorldState, UNKNOWN_OBJECT};

/// A world definition document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldDef {
    pub task_id: String,
    pub description: String,
    pub budget_kind: TaskKind,
    pub start_room: String,
    #[serde(default)]
    pub teleport_enabled: bool,
    pub rooms: Vec<RoomDef>,
    #[serde(default)]
    pub connections: Vec<ConnectionDef>,
    #[serde(default)]
    pub objects: Vec<ObjectDef>,
    pub goal_program: GoalProgram,
    #[serde(default)]
    pub focus_whitelist: Vec<String>,
    #[serde(default)]
    pub mix_recipes: Vec<MixRecipe>,
}

impl WorldDef {
    pub fn task_spec(&self, variation_seed: u64) -> TaskSpec {
        TaskSpec { task_id: self.task_id.clone(), description: self.description.clone(), kind: self.budget_kind, variation_seed }
    }

    pub fn object(&self, name: &str) -> Option<&ObjectDef> {
        self.objects.iter().find(|o| o.name == name)
    }

    pub fn room(&self, name: &str) -> Option<&RoomDef> {
        self.rooms.iter().find(|r| r.name == name)
    }

    pub fn subgoal_count(&self) -> usize {
        self.goal_program.required.len() + self.goal_program.optional.len()
    }

    pub fn total_points(&self) -> u32 {
        self.goal_program.required.iter().chain(&self.goal_program.optional).map(|s| s.points).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomDef {
    pub name: String,
    #[serde(default)]
    pub description: String,
}

/// A door between two rooms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionDef {
    pub between: [String; 2],
    #[serde(default = "yes")]
    pub open: bool,
}

fn yes() -> bool {
    true
}

/// Where an object starts.
pub const INVENTORY: &str = "inventory";
/// Objects that only come into existence later (mix products).
pub const NOWHERE: &str = "nowhere";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectDef {
    pub name: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    /// A room, a container object, `inventory`, or `nowhere`.
    pub location: String,
    /// Rooms a seeded variation may move this object to.
    #[serde(default)]
    pub legal_rooms: Vec<String>,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub portable: bool,
    #[serde(default)]
    pub container: Option<ContainerDef>,
    #[serde(default)]
    pub device: Option<DeviceDef>,
    #[serde(default)]
    pub liquid: bool,
    #[serde(default)]
    pub edible: bool,
    #[serde(default)]
    pub flushable: bool,
    #[serde(default)]
    pub conductive: bool,
    #[serde(default)]
    pub readable: Option<String>,
    #[serde(default)]
    pub temperature: Option<i32>,
    /// Reports the temperature of whatever it is used on.
    #[serde(default)]
    pub thermometer: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContainerDef {
    #[serde(default = "yes")]
    pub open: bool,
    #[serde(default)]
    pub openable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceDef {
    #[serde(default)]
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixRecipe {
    pub ingredients: Vec<String>,
    pub product: String,
}

/// Ordered required subgoals plus optional ones, worth 100 points in total.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalProgram {
    pub required: Vec<Subgoal>,
    #[serde(default)]
    pub optional: Vec<Subgoal>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Subgoal {
    pub id: String,
    #[serde(default)]
    pub description: String,
    pub points: u32,
    pub condition: Condition,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Condition {
    AgentIn { room: String },
    Focused { object: String },
    InInventory { object: String },
    Inside { object: String, container: String },
    IsOpen { object: String },
    IsActive { object: String },
    Used { tool: String, target: Option<String> },
    Examined { object: String },
    Consumed { object: String },
    Flushed { object: String },
    Connected { a: String, b: String },
    Exists { object: String },
}

impl Condition {
    /// Object names the condition mentions.
    pub fn objects(&self) -> Vec<&str> {
        match self {
            Condition::AgentIn { .. } => Vec::new(),
            Condition::Focused { object }
            | Condition::InInventory { object }
            | Condition::IsOpen { object }
            | Condition::IsActive { object }
            | Condition::Examined { object }
            | Condition::Consumed { object }
            | Condition::Flushed { object }
            | Condition::Exists { object } => alloc::vec![object.as_str()],
            Condition::Inside { object, container } => alloc::vec![object.as_str(), container.as_str()],
            Condition::Used { tool, target } => core::iter::once(tool.as_str()).chain(target.as_deref()).collect(),
            Condition::Connected { a, b } => alloc::vec![a.as_str(), b.as_str()],
        }
    }
}

#[cfg(test)]
pub(crate) mod fixture {
    use super::WorldDef;

    /// Small two-room world used by unit tests.
    pub(crate) fn lab() -> WorldDef {
        serde_json::from_str(
            r#"{
            "task_id": "lab",
            "description": "Measure the sample.",
            "budget_kind": "short",
            "start_room": "hallway",
            "focus_whitelist": ["thermometer", "sample", "red box"],
            "rooms": [{"name": "hallway"}, {"name": "kitchen"}, {"name": "lab"}],
            "connections": [
                {"between": ["hallway", "kitchen"]},
                {"between": ["hallway", "lab"], "open": false}
            ],
            "objects": [
                {"name": "thermometer", "location": "kitchen", "legal_rooms": ["kitchen", "hallway", "lab"], "portable": true, "thermometer": true},
                {"name": "cupboard", "location": "kitchen", "container": {"open": false, "openable": true}},
                {"name": "key", "location": "cupboard", "portable": true},
                {"name": "sample", "aliases": ["unknown sample"], "location": "lab", "portable": true, "temperature": 68},
                {"name": "red box", "location": "lab", "container": {}},
                {"name": "green box", "location": "lab", "container": {}},
                {"name": "blue paint", "location": "lab", "liquid": true},
                {"name": "yellow paint", "location": "lab", "liquid": true},
                {"name": "green paint", "location": "nowhere", "liquid": true},
                {"name": "bowl", "location": "lab", "portable": true, "container": {}}
            ],
            "mix_recipes": [{"ingredients": ["blue paint", "yellow paint"], "product": "green paint"}],
            "goal_program": {
                "required": [
                    {"id": "r1", "points": 20, "condition": {"kind": "focused", "object": "thermometer"}},
                    {"id": "r2", "points": 20, "condition": {"kind": "in_inventory", "object": "thermometer"}},
                    {"id": "r3", "points": 20, "condition": {"kind": "focused", "object": "sample"}},
                    {"id": "r4", "points": 30, "condition": {"kind": "focused", "object": "red box"}}
                ],
                "optional": [
                    {"id": "o1", "points": 10, "condition": {"kind": "in_inventory", "object": "sample"}}
                ]
            }
        }"#,
        )
        .expect("fixture world parses")
    }
}
