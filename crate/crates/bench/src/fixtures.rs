//! Built-in scripted backends and pre-seeded memories for the bundled worlds.
//!
//! Scripts are referenced from manifests as `builtin:<name>`. Each one is
//! laid out call by call in the order the orchestrator makes them, so it
//! assumes the default loop limits (8 sub-steps, 3 rejections).

use step_core::backend::{Role, Script};
use step_core::memory::{parse_insight, InsightId, MemoryStore};

/// Builds a script in orchestrator call order.
#[derive(Debug, Default)]
pub struct ScriptBuilder {
    script: Script,
}

impl ScriptBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn plan(&mut self, subtask: &str, cites: &str) -> &mut Self {
        self.script.push(Role::Planner, format!("SUBTASK: {subtask}\nINSIGHTS: {cites}"));
        self
    }

    /// An approved step; `done` marks the subtask finished.
    pub fn step(&mut self, think: &str, action: &str, done: bool) -> &mut Self {
        self.script.push(Role::Executor, format!("THINK: {think}\nACTION: {action}"));
        let done = if done { "YES" } else { "NO" };
        self.script.push(Role::Evaluator, format!("VERDICT: APPROVE\nDONE: {done}"));
        self
    }

    /// A candidate the Evaluator turns down.
    pub fn reject(&mut self, think: &str, action: &str, reason: &str) -> &mut Self {
        self.script.push(Role::Executor, format!("THINK: {think}\nACTION: {action}"));
        self.script.push(Role::Evaluator, format!("VERDICT: REJECT\nDONE: NO\nREASON: {reason}"));
        self
    }

    /// A subtask worked for `actions.len()` steps, re-planned with the same
    /// wording each time the allowance runs out.
    pub fn phase(&mut self, subtask: &str, cites: &str, actions: &[(&str, &str)], done: bool, allowance: usize) -> &mut Self {
        for (i, chunk) in actions.chunks(allowance).enumerate() {
            self.plan(subtask, cites);
            for (j, (think, action)) in chunk.iter().enumerate() {
                let last = i * allowance + j + 1 == actions.len();
                self.step(think, action, done && last);
            }
        }
        self
    }

    /// Memory-Generator answers: reflection, essential steps (skipped when
    /// `None`), abstraction.
    pub fn memory(&mut self, reflect: &str, essential: Option<&str>, abstraction: &str) -> &mut Self {
        self.script.push(Role::Memory, reflect);
        if let Some(e) = essential {
            self.script.push(Role::Memory, e);
        }
        self.script.push(Role::Memory, abstraction);
        self
    }

    pub fn build(&self) -> Script {
        self.script.clone()
    }
}

const ALLOWANCE: usize = 8;

fn steps<'a>(items: &[(&'a str, &'a str)]) -> Vec<(&'a str, &'a str)> {
    items.to_vec()
}

/// Planner-on run of temp-measure: the first attempt stalls at 60 after
/// focusing substance B, later attempts use the learned rules to finish at 90.
pub fn temp_measure_golden() -> Script {
    let mut b = ScriptBuilder::new();
    b.phase(
        "find the thermometer",
        "none",
        &steps(&[
            ("a thermometer is usually kept in the kitchen", "go to kitchen"),
            ("the task says to focus on the thermometer first", "focus on thermometer"),
            ("I will need to carry it to the substance", "pick up thermometer"),
        ]),
        true,
        ALLOWANCE,
    );
    b.phase(
        "find unknown substance B",
        "none",
        &steps(&[
            ("the living room is reached through the hallway", "go to hallway"),
            ("substance B is in the living room", "go to living room"),
            ("the task says to focus on substance B next", "focus on substance b"),
        ]),
        true,
        ALLOWANCE,
    );
    let idle = [
        ("maybe its appearance tells the temperature", "look at substance b"),
        ("survey the room again", "look around"),
        ("check the red box", "look at red box"),
        ("check the green box", "look at green box"),
        ("what am I carrying", "inventory"),
        ("perhaps it changes over time", "wait"),
        ("re-read the task", "task"),
        ("look at the thermometer", "look at thermometer"),
    ];
    let wander: Vec<(&str, &str)> = idle.iter().cycle().take(31).copied().collect();
    b.phase("determine the temperature of substance B", "none", &wander, false, ALLOWANCE);
    b.memory(
        "INSIGHT: going to the kitchen is necessary for finding the thermometer\n\
         INSIGHT: focusing on the thermometer is necessary for measuring the temperature\n\
         INSIGHT: looking at substance B does not contribute to measuring the temperature\n\
         INSIGHT: using the thermometer on substance B may contribute to choosing the right box",
        Some("ESSENTIAL: [1, 4, 5]"),
        "MILESTONE: retrieve and focus the kitchen thermometer [1, 2, 3]\n\
         MILESTONE: carry it to the living room and focus substance B [4, 5, 6]",
    );
    for attempt in 2..=5 {
        b.phase(
            "get the thermometer from the kitchen",
            "[1, 2]",
            &steps(&[
                ("the thermometer is in the kitchen", "go to kitchen"),
                ("focus on it first", "focus on thermometer"),
                ("bring it along", "pick up thermometer"),
            ]),
            true,
            ALLOWANCE,
        );
        b.phase(
            "bring the thermometer to substance B and focus on it",
            "none",
            &steps(&[
                ("head back through the hallway", "go to hallway"),
                ("substance B is in the living room", "go to living room"),
                ("focus on the substance", "focus on substance b"),
            ]),
            true,
            ALLOWANCE,
        );
        b.plan("measure substance B and focus on the matching box", "[3, 4]");
        if attempt == 2 {
            b.reject("inspect the substance", "look at substance b", "looking at it violates rule [3]");
        }
        b.step("measure with the thermometer", "use thermometer on substance b", false);
        b.step("68 degrees is above 50, so the red box", "focus on red box", true);
        let reflect = if attempt == 2 { "INSIGHT: using the thermometer on substance B is necessary for choosing the right box" } else { "INSIGHTS: none" };
        b.memory(
            reflect,
            Some("ESSENTIAL: [1, 4, 5, 7]"),
            "MILESTONE: retrieve and focus the kitchen thermometer [1, 2, 3]\n\
             MILESTONE: carry it to the living room and focus substance B [4, 5, 6]\n\
             MILESTONE: measure substance B and pick the box by its temperature [7, 8]",
        );
    }
    b.build()
}

/// Memory that hints at both the thermometer and substance B.
pub fn temp_measure_hints() -> MemoryStore {
    store(
        "temp-measure",
        &[
            "going to the kitchen is necessary for finding the thermometer",
            "going to the living room is necessary for finding substance B",
            "focusing on substance B may contribute to the task",
        ],
    )
}

const PLANNER_OFF_TRIAL: [(&str, &str); 14] = [
    ("see where I am", "look around"),
    ("substance B is in the living room", "go to living room"),
    ("survey the living room", "look around"),
    ("inspect the substance", "look at substance b"),
    ("maybe there are tools elsewhere", "go to hallway"),
    ("try the art studio", "go to art studio"),
    ("survey the studio", "look around"),
    ("nothing useful here", "go to hallway"),
    ("back to the substance", "go to living room"),
    ("check the red box", "look at red box"),
    ("check the green box", "look at green box"),
    ("take the substance", "pick up substance b"),
    ("confirm I hold it", "inventory"),
    ("focusing on substance B may contribute to the task", "focus on substance b"),
];

/// Planner-off run of temp-measure with [`temp_measure_hints`]: the Executor
/// goes for substance B first and hits the focus penalty at step 14.
pub fn temp_measure_planner_off() -> Script {
    let mut b = ScriptBuilder::new();
    for _ in 0..5 {
        for (think, action) in PLANNER_OFF_TRIAL {
            b.step(think, action, false);
        }
        b.memory(
            "INSIGHT: focusing on substance B may contribute to the task",
            Some("ESSENTIAL: none"),
            "MILESTONE: pick up substance B in the living room [12]",
        );
    }
    b.build()
}

/// Memory whose negative rules block two tempting moves.
pub fn temp_measure_rules() -> MemoryStore {
    store(
        "temp-measure",
        &[
            "going to the kitchen is necessary for finding the thermometer",
            "going to the art studio does not contribute to the task",
            "focusing on the green box does not contribute to the task",
        ],
    )
}

/// One attempt in which the Evaluator rejects two rule-breaking candidates
/// and the Executor's replacements carry the trial to completion.
pub fn temp_measure_rule_blocking() -> Script {
    let mut b = ScriptBuilder::new();
    b.plan("find the thermometer", "[1]");
    b.reject("the studio might hold instruments", "go to art studio", "rule [2] says the art studio does not help");
    b.step("the kitchen is the better bet", "go to kitchen", false);
    b.step("focus on it first", "focus on thermometer", false);
    b.step("carry it along", "pick up thermometer", true);
    b.phase(
        "focus on substance B",
        "none",
        &steps(&[("through the hallway", "go to hallway"), ("into the living room", "go to living room"), ("focus on the substance", "focus on substance b")]),
        true,
        ALLOWANCE,
    );
    b.plan("choose the box that matches the temperature", "none");
    b.step("measure first", "use thermometer on substance b", false);
    b.reject("green looks calm", "focus on green box", "violates rule [3]");
    b.step("68 degrees is above 50", "focus on red box", true);
    b.memory(
        "INSIGHT: using the thermometer on substance B is necessary for choosing the right box",
        Some("ESSENTIAL: [1, 4, 5, 7]"),
        "MILESTONE: retrieve and focus the kitchen thermometer [1, 2, 3]\n\
         MILESTONE: focus substance B then the box its temperature picks [4, 5, 6, 7, 8]",
    );
    b.build()
}

/// One planner-on attempt that solves melt-lead.
pub fn melt_lead_golden() -> Script {
    let mut b = ScriptBuilder::new();
    b.phase(
        "focus on the thermometer",
        "none",
        &steps(&[
            ("the lead and the thermometer are in the kitchen", "go to kitchen"),
            ("focus on the thermometer first", "focus on thermometer"),
            ("carry it", "pick up thermometer"),
        ]),
        true,
        ALLOWANCE,
    );
    b.phase(
        "focus on the lead and measure it",
        "none",
        &steps(&[("focus on the lead next", "focus on lead"), ("measure the lead", "use thermometer on lead")]),
        true,
        ALLOWANCE,
    );
    b.phase("pick the box", "none", &steps(&[("lead melts far above 50 degrees", "focus on red box")]), true, ALLOWANCE);
    b.memory(
        "INSIGHT: focusing on the thermometer is necessary for the task",
        Some("ESSENTIAL: [1, 3]"),
        "MILESTONE: focus the thermometer in the kitchen [1, 2, 3]\nMILESTONE: focus the lead, measure it, pick the red box [4, 5, 6]",
    );
    b.build()
}

/// One planner-on attempt that solves paint-mix.
pub fn paint_mix_golden() -> Script {
    let mut b = ScriptBuilder::new();
    b.phase(
        "reach the art studio with a bowl",
        "none",
        &steps(&[
            ("a bowl will hold the paints", "pick up bowl"),
            ("the studio is off the hallway", "go to hallway"),
            ("its door is closed", "open door to art studio"),
            ("enter the studio", "go to art studio"),
        ]),
        true,
        ALLOWANCE,
    );
    b.phase(
        "combine blue and yellow paint",
        "none",
        &steps(&[("blue is one ingredient", "pour blue paint into bowl"), ("yellow is the other", "pour yellow paint into bowl"), ("stir them", "mix bowl")]),
        true,
        ALLOWANCE,
    );
    b.phase("focus on the result", "none", &steps(&[("the bowl now holds green paint", "focus on green paint")]), true, ALLOWANCE);
    b.memory(
        "INSIGHT: mixing blue paint and yellow paint is necessary for making green paint",
        Some("ESSENTIAL: [1, 2, 3]"),
        "MILESTONE: bring a bowl into the art studio [1, 2, 3, 4]\nMILESTONE: pour blue and yellow into it and mix [5, 6, 7]\nMILESTONE: focus on the green paint [8]",
    );
    b.build()
}

fn store(task_id: &str, sentences: &[&str]) -> MemoryStore {
    let mut m = MemoryStore::empty(task_id);
    for (i, s) in sentences.iter().enumerate() {
        let mut insight = parse_insight(s, 0).expect("fixture insight parses");
        insight.id = InsightId(i as u32 + 1);
        m.insights.push(insight);
    }
    m
}

/// Script names usable as `builtin:<name>`.
pub const SCRIPTS: [&str; 5] = ["temp-measure-golden", "temp-measure-planner-off", "temp-measure-rule-blocking", "melt-lead-golden", "paint-mix-golden"];

pub fn script(name: &str) -> Option<Script> {
    Some(match name {
        "temp-measure-golden" => temp_measure_golden(),
        "temp-measure-planner-off" => temp_measure_planner_off(),
        "temp-measure-rule-blocking" => temp_measure_rule_blocking(),
        "melt-lead-golden" => melt_lead_golden(),
        "paint-mix-golden" => paint_mix_golden(),
        _ => return None,
    })
}

/// Memory names usable as `builtin:<name>`.
pub const MEMORIES: [&str; 2] = ["temp-measure-hints", "temp-measure-rules"];

pub fn memory(name: &str) -> Option<MemoryStore> {
    Some(match name {
        "temp-measure-hints" => temp_measure_hints(),
        "temp-measure-rules" => temp_measure_rules(),
        _ => return None,
    })
}

/// Bundled manifests, by file name.
pub const MANIFESTS: [(&str, &str); 4] = [
    ("golden.toml", include_str!("../fixtures/golden.toml")),
    ("planner-off.toml", include_str!("../fixtures/planner-off.toml")),
    ("rule-blocking.toml", include_str!("../fixtures/rule-blocking.toml")),
    ("library.toml", include_str!("../fixtures/library.toml")),
];
