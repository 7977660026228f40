use step_core::task::TaskKind;
use step_core::world::WorldDef;

/// Three-room world: fetch and focus a thermometer, focus a sample, then
/// focus the red box.
pub fn lab() -> WorldDef {
    serde_json::from_str(
        r#"{
        "task_id": "lab",
        "description": "Measure the sample, then focus on the red box if it is above 50 degrees.",
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
    .expect("lab world parses")
}

/// The same world under the long budget.
pub fn lab_long() -> WorldDef {
    let mut def = lab();
    def.task_id = "lab-long".into();
    def.budget_kind = TaskKind::Long;
    def
}

/// Phrases an agent could type in `def`: object names, aliases, rooms, and doors.
pub fn vocabulary(def: &WorldDef) -> Vec<String> {
    let mut out = Vec::new();
    for o in &def.objects {
        out.push(o.name.clone());
        out.extend(o.aliases.iter().cloned());
    }
    for r in &def.rooms {
        out.push(r.name.clone());
        out.push(format!("door to {}", r.name));
    }
    out.extend(["door", "nothing here", "the thermometer"].map(String::from));
    out
}
