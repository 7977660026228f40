use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Condition, ObjectDef, WorldDef, INVENTORY, NOWHERE};
use crate::action::{normalize, parse_command, ActionCommand, ActionParseError, ActionVerb};
use crate::env::{EnvError, Environment, StepOutcome};

/// Observation for an object reference that matches nothing in view.
pub const UNKNOWN_OBJECT: &str = "You don't see that here.";

const AMBIENT_TEMPERATURE: i32 = 10;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Place {
    Room(String),
    Inventory,
    Inside(String),
    Nowhere,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Fact {
    Focused(String),
    Used(String, Option<String>),
    Examined(String),
    Consumed(String),
    Flushed(String),
    Connected(String, String),
}

/// Complete mutable state of one world instance. Ordered so the linter can
/// keep a visited set.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WorldState {
    agent_room: String,
    places: BTreeMap<String, Place>,
    open: BTreeSet<String>,
    closed_doors: BTreeSet<(String, String)>,
    active: BTreeSet<String>,
    facts: BTreeSet<Fact>,
    required_done: usize,
    optional_done: BTreeSet<usize>,
    score: i32,
    terminal: bool,
    fatal: bool,
}

fn door_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_owned(), b.to_owned())
    } else {
        (b.to_owned(), a.to_owned())
    }
}

fn initial_place(def: &WorldDef, location: &str) -> Place {
    if location == INVENTORY {
        Place::Inventory
    } else if location == NOWHERE {
        Place::Nowhere
    } else if def.room(location).is_some() {
        Place::Room(location.to_owned())
    } else {
        Place::Inside(location.to_owned())
    }
}

impl WorldState {
    /// Seed 0 is the canonical layout; other seeds move objects that declare
    /// `legal_rooms` to one of those rooms.
    pub fn initial(def: &WorldDef, variation_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(variation_seed);
        let mut places = BTreeMap::new();
        for obj in &def.objects {
            let mut place = initial_place(def, &obj.location);
            if variation_seed != 0 && !obj.legal_rooms.is_empty() && matches!(place, Place::Room(_)) {
                let pick = rng.gen_range(0..obj.legal_rooms.len());
                place = Place::Room(obj.legal_rooms[pick].clone());
            }
            places.insert(obj.name.clone(), place);
        }
        WorldState {
            agent_room: def.start_room.clone(),
            places,
            open: def.objects.iter().filter(|o| o.container.is_some_and(|c| c.open)).map(|o| o.name.clone()).collect(),
            closed_doors: def.connections.iter().filter(|c| !c.open).map(|c| door_key(&c.between[0], &c.between[1])).collect(),
            active: def.objects.iter().filter(|o| o.device.is_some_and(|d| d.active)).map(|o| o.name.clone()).collect(),
            facts: BTreeSet::new(),
            required_done: 0,
            optional_done: BTreeSet::new(),
            score: 0,
            terminal: false,
            fatal: false,
        }
    }

    pub fn agent_room(&self) -> &str {
        &self.agent_room
    }

    pub fn place(&self, object: &str) -> Option<&Place> {
        self.places.get(object)
    }

    pub fn score(&self) -> i32 {
        self.score
    }

    pub fn required_done(&self) -> usize {
        self.required_done
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal
    }

    pub fn is_fatal(&self) -> bool {
        self.fatal
    }

    /// Where each object sits, for variation comparisons.
    pub fn placements(&self) -> &BTreeMap<String, Place> {
        &self.places
    }

    fn accessible(&self, object: &str) -> bool {
        let mut current = object;
        for _ in 0..=self.places.len() {
            match self.places.get(current) {
                Some(Place::Room(r)) => return *r == self.agent_room,
                Some(Place::Inventory) => return true,
                Some(Place::Inside(c)) if self.open.contains(c) => current = c,
                _ => return false,
            }
        }
        false
    }

    /// Accessible objects in definition order.
    pub fn visible<'d>(&self, def: &'d WorldDef) -> Vec<&'d ObjectDef> {
        def.objects.iter().filter(|o| self.accessible(&o.name)).collect()
    }

    fn neighbours<'d>(&self, def: &'d WorldDef) -> Vec<(&'d str, bool)> {
        def.connections
            .iter()
            .filter_map(|c| {
                let [a, b] = &c.between;
                let other = if *a == self.agent_room {
                    b
                } else if *b == self.agent_room {
                    a
                } else {
                    return None;
                };
                Some((other.as_str(), !self.closed_doors.contains(&door_key(a, b))))
            })
            .collect()
    }

    fn contents(&self, def: &WorldDef, container: &str) -> Vec<String> {
        def.objects.iter().filter(|o| self.places.get(&o.name) == Some(&Place::Inside(container.to_owned()))).map(|o| o.name.clone()).collect()
    }

    fn is_within(&self, object: &str, ancestor: &str) -> bool {
        let mut current = object;
        for _ in 0..=self.places.len() {
            match self.places.get(current) {
                Some(Place::Inside(c)) if c == ancestor => return true,
                Some(Place::Inside(c)) => current = c,
                _ => return false,
            }
        }
        false
    }

    pub fn holds(&self, cond: &Condition) -> bool {
        match cond {
            Condition::AgentIn { room } => self.agent_room == *room,
            Condition::Focused { object } => self.facts.contains(&Fact::Focused(object.clone())),
            Condition::InInventory { object } => self.places.get(object) == Some(&Place::Inventory),
            Condition::Inside { object, container } => self.places.get(object) == Some(&Place::Inside(container.clone())),
            Condition::IsOpen { object } => self.open.contains(object),
            Condition::IsActive { object } => self.active.contains(object),
            Condition::Used { tool, target } => match target {
                Some(_) => self.facts.contains(&Fact::Used(tool.clone(), target.clone())),
                None => self.facts.iter().any(|f| matches!(f, Fact::Used(t, _) if t == tool)),
            },
            Condition::Examined { object } => self.facts.contains(&Fact::Examined(object.clone())),
            Condition::Consumed { object } => self.facts.contains(&Fact::Consumed(object.clone())),
            Condition::Flushed { object } => self.facts.contains(&Fact::Flushed(object.clone())),
            Condition::Connected { a, b } => {
                let (x, y) = door_key(a, b);
                self.facts.contains(&Fact::Connected(x, y))
            }
            Condition::Exists { object } => !matches!(self.places.get(object), Some(Place::Nowhere) | None),
        }
    }

    /// Picks the candidate whose name or alias best matches `phrase`:
    /// longest name contained in the phrase, else the phrase contained in a
    /// name. Ties go to the earlier candidate.
    fn resolve<'c>(phrase: &str, candidates: impl IntoIterator<Item = (&'c str, &'c [String])>) -> Option<&'c str> {
        let phrase = normalize(phrase);
        let phrase = phrase.strip_prefix("the ").unwrap_or(&phrase);
        let mut best: Option<(usize, &str)> = None;
        for (name, aliases) in candidates {
            for label in core::iter::once(name).chain(aliases.iter().map(String::as_str)) {
                let score = if label == phrase {
                    usize::MAX
                } else if contains_words(phrase, label) {
                    label.len()
                } else if contains_words(label, phrase) {
                    phrase.len()
                } else {
                    continue;
                };
                if best.is_none_or(|(s, _)| score > s) {
                    best = Some((score, name));
                }
            }
        }
        best.map(|(_, name)| name)
    }

    fn resolve_object<'d>(&self, def: &'d WorldDef, phrase: &str) -> Option<&'d ObjectDef> {
        let visible = self.visible(def);
        let name = Self::resolve(phrase, visible.iter().map(|o| (o.name.as_str(), o.aliases.as_slice())))?;
        def.object(name)
    }

    fn resolve_room<'d>(def: &'d WorldDef, phrase: &str) -> Option<&'d str> {
        Self::resolve(phrase, def.rooms.iter().map(|r| (r.name.as_str(), &[][..])))
    }

    /// Applies one action. A finished episode is left untouched.
    pub fn apply(&mut self, def: &WorldDef, action: &ActionCommand) -> StepOutcome {
        let mut observation = self.dispatch(def, action);
        if self.fatal {
            self.terminal = true;
            self.score = 0;
        } else {
            self.update_score(def);
            if self.required_done == def.goal_program.required.len() && !def.goal_program.required.is_empty() {
                self.terminal = true;
                observation.push_str(" (Task Completed!)");
            }
        }
        StepOutcome { observation, score: self.score, terminal: self.terminal, fatal: self.fatal }
    }

    fn update_score(&mut self, def: &WorldDef) {
        let required = &def.goal_program.required;
        while self.required_done < required.len() && self.holds(&required[self.required_done].condition) {
            self.score += required[self.required_done].points as i32;
            self.required_done += 1;
        }
        for (i, goal) in def.goal_program.optional.iter().enumerate() {
            if !self.optional_done.contains(&i) && self.holds(&goal.condition) {
                self.optional_done.insert(i);
                self.score += goal.points as i32;
            }
        }
    }

    fn dispatch(&mut self, def: &WorldDef, action: &ActionCommand) -> String {
        let args: Vec<&str> = action.args.iter().map(String::as_str).collect();
        match (action.verb, args.as_slice()) {
            (ActionVerb::LookAround, _) => self.describe_room(def),
            (ActionVerb::Task, _) => def.description.clone(),
            (ActionVerb::Inventory, _) => self.describe_inventory(def),
            (ActionVerb::Wait, _) => "Time passes.".to_owned(),
            (ActionVerb::GoTo, [room]) => self.go(def, room),
            (ActionVerb::Teleport, [room]) => self.teleport(def, room),
            (ActionVerb::Open | ActionVerb::Close, [target]) => self.open_close(def, action.verb == ActionVerb::Open, target),
            (verb, [first, rest @ ..]) => {
                let Some(obj) = self.resolve_object(def, first) else {
                    return UNKNOWN_OBJECT.to_owned();
                };
                let second = match rest.first() {
                    Some(phrase) => match self.resolve_object(def, phrase) {
                        Some(o) => Some(o),
                        None => return UNKNOWN_OBJECT.to_owned(),
                    },
                    None => None,
                };
                self.act_on(def, verb, obj, second)
            }
            _ => "That action needs an object.".to_owned(),
        }
    }

    fn act_on(&mut self, def: &WorldDef, verb: ActionVerb, obj: &ObjectDef, second: Option<&ObjectDef>) -> String {
        let name = obj.name.as_str();
        match (verb, second) {
            (ActionVerb::Activate | ActionVerb::Deactivate, _) => {
                if obj.device.is_none() {
                    return alloc::format!("The {name} is not something you can switch.");
                }
                let on = verb == ActionVerb::Activate;
                if self.active.contains(name) == on {
                    return alloc::format!("The {name} is already {}.", if on { "on" } else { "off" });
                }
                if on {
                    self.active.insert(name.to_owned());
                } else {
                    self.active.remove(name);
                }
                alloc::format!("The {name} is now {}.", if on { "activated" } else { "deactivated" })
            }
            (ActionVerb::Connect, Some(other)) => {
                if !obj.conductive || !other.conductive || obj.name == other.name {
                    return "Those cannot be connected.".to_owned();
                }
                let (a, b) = door_key(name, &other.name);
                self.facts.insert(Fact::Connected(a, b));
                alloc::format!("The {name} is now connected to the {}.", other.name)
            }
            (ActionVerb::Disconnect, _) => {
                let before = self.facts.len();
                self.facts.retain(|f| !matches!(f, Fact::Connected(a, b) if a == name || b == name));
                if self.facts.len() == before {
                    alloc::format!("The {name} is not connected to anything.")
                } else {
                    alloc::format!("The {name} is now disconnected.")
                }
            }
            (ActionVerb::Use, target) => {
                self.facts.insert(Fact::Used(name.to_owned(), target.map(|t| t.name.clone())));
                match target {
                    Some(t) if obj.thermometer => {
                        alloc::format!("The {name} measures a temperature of {} degrees celsius.", t.temperature.unwrap_or(AMBIENT_TEMPERATURE))
                    }
                    Some(t) => alloc::format!("You use the {name} on the {}.", t.name),
                    None => alloc::format!("You use the {name}."),
                }
            }
            (ActionVerb::LookAt, _) => {
                self.facts.insert(Fact::Examined(name.to_owned()));
                self.describe_object(def, obj)
            }
            (ActionVerb::LookIn, _) => {
                if obj.container.is_none() {
                    return alloc::format!("The {name} is not a container.");
                }
                if !self.open.contains(name) {
                    return alloc::format!("The {name} is closed.");
                }
                alloc::format!("Inside the {name} is: {}.", list_or_nothing(&self.contents(def, name)))
            }
            (ActionVerb::Read, _) => {
                self.facts.insert(Fact::Examined(name.to_owned()));
                match &obj.readable {
                    Some(text) => text.clone(),
                    None => alloc::format!("There is nothing to read on the {name}."),
                }
            }
            (ActionVerb::Move, Some(dest)) => self.put_into(def, obj, dest),
            (ActionVerb::PickUp, _) => {
                if !obj.portable {
                    return alloc::format!("You can't pick up the {name}.");
                }
                if self.places.get(name) == Some(&Place::Inventory) {
                    return alloc::format!("The {name} is already in your inventory.");
                }
                self.places.insert(name.to_owned(), Place::Inventory);
                alloc::format!("You move the {name} to the inventory.")
            }
            (ActionVerb::PutDown, _) => {
                if self.places.get(name) != Some(&Place::Inventory) {
                    return alloc::format!("The {name} is not in your inventory.");
                }
                self.places.insert(name.to_owned(), Place::Room(self.agent_room.clone()));
                alloc::format!("You drop the {name}.")
            }
            (ActionVerb::Pour, Some(dest)) => {
                let liquids: Vec<String> = if obj.liquid {
                    alloc::vec![obj.name.clone()]
                } else {
                    self.contents(def, name).into_iter().filter(|c| def.object(c).is_some_and(|o| o.liquid)).collect()
                };
                self.transfer_liquids(def, liquids, dest, name)
            }
            (ActionVerb::Dunk, Some(dest)) => self.put_into(def, obj, dest),
            (ActionVerb::Mix, _) => self.mix(def, obj),
            (ActionVerb::Eat, _) => {
                if !obj.edible {
                    return alloc::format!("The {name} is not edible.");
                }
                self.places.insert(name.to_owned(), Place::Nowhere);
                self.facts.insert(Fact::Consumed(name.to_owned()));
                alloc::format!("You eat the {name}.")
            }
            (ActionVerb::Flush, _) => {
                if !obj.flushable {
                    return alloc::format!("The {name} cannot be flushed.");
                }
                self.facts.insert(Fact::Flushed(name.to_owned()));
                alloc::format!("The {name} flushes.")
            }
            (ActionVerb::FocusOn, _) => self.focus(def, name),
            _ => "That action needs a second object.".to_owned(),
        }
    }

    fn focus(&mut self, def: &WorldDef, name: &str) -> String {
        if self.facts.contains(&Fact::Focused(name.to_owned())) {
            return alloc::format!("You are already focused on the {name}.");
        }
        let whitelisted = def.focus_whitelist.iter().any(|w| w == name);
        // focusing a later focus target while an earlier one is still pending skips a required step
        let out_of_order = def.goal_program.required.iter().enumerate().skip(self.required_done).any(|(i, goal)| {
            matches!(&goal.condition, Condition::Focused { object } if object == name)
                && def.goal_program.required[self.required_done..i]
                    .iter()
                    .any(|earlier| matches!(&earlier.condition, Condition::Focused { object } if !self.facts.contains(&Fact::Focused(object.clone()))))
        });
        if !whitelisted || out_of_order {
            self.fatal = true;
            return alloc::format!("You focus on the {name}. That was the wrong thing to focus on: you lose 100 points and the task is over.");
        }
        self.facts.insert(Fact::Focused(name.to_owned()));
        alloc::format!("You focus on the {name}.")
    }

    fn put_into(&mut self, def: &WorldDef, obj: &ObjectDef, dest: &ObjectDef) -> String {
        let name = obj.name.as_str();
        if !obj.portable {
            return alloc::format!("You can't move the {name}.");
        }
        if dest.container.is_none() {
            return alloc::format!("The {} is not a container.", dest.name);
        }
        if !self.open.contains(&dest.name) {
            return alloc::format!("The {} is closed.", dest.name);
        }
        if dest.name == name || self.is_within(&dest.name, name) {
            return "You can't put something inside itself.".to_owned();
        }
        let _ = def;
        self.places.insert(name.to_owned(), Place::Inside(dest.name.clone()));
        alloc::format!("You move the {name} to the {}.", dest.name)
    }

    fn transfer_liquids(&mut self, def: &WorldDef, liquids: Vec<String>, dest: &ObjectDef, source: &str) -> String {
        if dest.container.is_none() {
            return alloc::format!("The {} can't hold liquids.", dest.name);
        }
        if !self.open.contains(&dest.name) {
            return alloc::format!("The {} is closed.", dest.name);
        }
        let liquids: Vec<String> = liquids.into_iter().filter(|l| *l != dest.name && !self.is_within(&dest.name, l)).collect();
        if liquids.is_empty() {
            return alloc::format!("There is no liquid to transfer from the {source}.");
        }
        for l in &liquids {
            self.places.insert(l.clone(), Place::Inside(dest.name.clone()));
        }
        let _ = def;
        alloc::format!("The {} is now in the {}.", join_and(&liquids), dest.name)
    }

    fn mix(&mut self, def: &WorldDef, obj: &ObjectDef) -> String {
        let name = obj.name.as_str();
        if obj.container.is_none() {
            return alloc::format!("The {name} is not a container.");
        }
        let contents: BTreeSet<String> = self.contents(def, name).into_iter().collect();
        for recipe in &def.mix_recipes {
            if !recipe.ingredients.is_empty() && recipe.ingredients.iter().all(|i| contents.contains(i)) {
                for i in &recipe.ingredients {
                    self.places.insert(i.clone(), Place::Nowhere);
                }
                self.places.insert(recipe.product.clone(), Place::Inside(name.to_owned()));
                return alloc::format!("The contents of the {name} mix, producing {}.", recipe.product);
            }
        }
        alloc::format!("Nothing happens when you mix the {name}.")
    }

    fn go(&mut self, def: &WorldDef, phrase: &str) -> String {
        let Some(room) = Self::resolve_room(def, phrase) else {
            return UNKNOWN_OBJECT.to_owned();
        };
        if room == self.agent_room {
            return alloc::format!("You are already in the {room}.");
        }
        match self.neighbours(def).into_iter().find(|(r, _)| *r == room) {
            Some((_, true)) => {
                self.agent_room = room.to_owned();
                alloc::format!("You move to the {room}.")
            }
            Some((_, false)) => alloc::format!("The door to the {room} is closed."),
            None => alloc::format!("You can't get to the {room} from here."),
        }
    }

    fn teleport(&mut self, def: &WorldDef, phrase: &str) -> String {
        if !def.teleport_enabled {
            return "Teleporting is not available in this mode.".to_owned();
        }
        match Self::resolve_room(def, phrase) {
            Some(room) => {
                self.agent_room = room.to_owned();
                alloc::format!("You teleport to the {room}.")
            }
            None => UNKNOWN_OBJECT.to_owned(),
        }
    }

    fn open_close(&mut self, def: &WorldDef, open: bool, phrase: &str) -> String {
        let verb = if open { "open" } else { "closed" };
        if contains_words(&normalize(phrase), "door") {
            let neighbours = self.neighbours(def);
            let rooms: Vec<(&str, &[String])> = neighbours.iter().map(|(r, _)| (*r, &[][..])).collect();
            let target = match neighbours.len() {
                0 => None,
                1 => Some(neighbours[0].0),
                _ => Self::resolve(phrase, rooms.iter().copied()),
            };
            if let Some(room) = target {
                let key = door_key(&self.agent_room, room);
                if self.closed_doors.contains(&key) != open {
                    return alloc::format!("The door to the {room} is already {verb}.");
                }
                if open {
                    self.closed_doors.remove(&key);
                } else {
                    self.closed_doors.insert(key);
                }
                return alloc::format!("The door to the {room} is now {verb}.");
            }
        }
        let Some(obj) = self.resolve_object(def, phrase) else {
            return UNKNOWN_OBJECT.to_owned();
        };
        let name = obj.name.as_str();
        if !obj.container.is_some_and(|c| c.openable) {
            return alloc::format!("The {name} can't be {}.", if open { "opened" } else { "closed" });
        }
        if self.open.contains(name) == open {
            return alloc::format!("The {name} is already {verb}.");
        }
        if open {
            self.open.insert(name.to_owned());
        } else {
            self.open.remove(name);
        }
        alloc::format!("The {name} is now {verb}.")
    }

    fn brief(&self, def: &WorldDef, obj: &ObjectDef) -> String {
        let name = &obj.name;
        if let Some(c) = obj.container {
            if c.openable && !self.open.contains(name) {
                return alloc::format!("a {name}. The {name} is closed.");
            }
            return alloc::format!("a {name} (containing {})", list_or_nothing(&self.contents(def, name)));
        }
        if obj.device.is_some() {
            return alloc::format!("a {name}, which is turned {}", if self.active.contains(name) { "on" } else { "off" });
        }
        if obj.liquid {
            return alloc::format!("a substance called {name}");
        }
        alloc::format!("a {name}")
    }

    fn describe_room(&self, def: &WorldDef) -> String {
        let mut out = alloc::format!("This room is called the {}. In it, you see:\n\tthe agent\n", self.agent_room);
        for obj in &def.objects {
            if self.places.get(&obj.name) == Some(&Place::Room(self.agent_room.clone())) {
                let _ = writeln!(out, "\t{}", self.brief(def, obj));
            }
        }
        out.push_str("You also see:\n");
        for (room, open) in self.neighbours(def) {
            let _ = writeln!(out, "\tA door to the {room} (that is {})", if open { "open" } else { "closed" });
        }
        out.trim_end().to_owned()
    }

    fn describe_inventory(&self, def: &WorldDef) -> String {
        let items: Vec<String> = def.objects.iter().filter(|o| self.places.get(&o.name) == Some(&Place::Inventory)).map(|o| self.brief(def, o)).collect();
        if items.is_empty() {
            return "In your inventory, you see:\n\tnothing".to_owned();
        }
        let mut out = "In your inventory, you see:".to_owned();
        for i in items {
            let _ = write!(out, "\n\t{i}");
        }
        out
    }

    fn describe_object(&self, def: &WorldDef, obj: &ObjectDef) -> String {
        let mut out = self.brief(def, obj);
        if obj.thermometer {
            let _ = write!(out, ", currently reading a temperature of {AMBIENT_TEMPERATURE} degrees celsius");
        }
        if !obj.description.is_empty() {
            let _ = write!(out, ". {}", obj.description);
        }
        out
    }
}

impl WorldState {
    /// Actions worth trying from this state when searching for a solution,
    /// restricted to objects in `relevant`.
    pub(super) fn search_actions(&self, def: &WorldDef, relevant: &BTreeSet<String>) -> Vec<ActionCommand> {
        use ActionVerb as V;
        let mut out = Vec::new();
        if def.teleport_enabled {
            for room in &def.rooms {
                if room.name != self.agent_room {
                    out.push(ActionCommand::new(V::Teleport, &[&room.name]));
                }
            }
        } else {
            for (room, open) in self.neighbours(def) {
                if open {
                    out.push(ActionCommand::new(V::GoTo, &[room]));
                } else {
                    out.push(ActionCommand::new(V::Open, &[&alloc::format!("door to {room}")]));
                }
            }
        }
        let visible: Vec<&ObjectDef> = self.visible(def).into_iter().filter(|o| relevant.contains(&o.name)).collect();
        let tools: BTreeSet<&str> = def
            .goal_program
            .required
            .iter()
            .chain(&def.goal_program.optional)
            .filter_map(|g| match &g.condition {
                Condition::Used { tool, .. } => Some(tool.as_str()),
                _ => None,
            })
            .collect();
        for o in &visible {
            let n = o.name.as_str();
            let held = self.places.get(n) == Some(&Place::Inventory);
            if o.portable && !held {
                out.push(ActionCommand::new(V::PickUp, &[n]));
            }
            if held {
                out.push(ActionCommand::new(V::PutDown, &[n]));
            }
            if o.container.is_some_and(|c| c.openable) && !self.open.contains(n) {
                out.push(ActionCommand::new(V::Open, &[n]));
            }
            if o.device.is_some() {
                let verb = if self.active.contains(n) { V::Deactivate } else { V::Activate };
                out.push(ActionCommand::new(verb, &[n]));
            }
            if def.focus_whitelist.iter().any(|w| w == n) && !self.facts.contains(&Fact::Focused(n.to_owned())) {
                out.push(ActionCommand::new(V::FocusOn, &[n]));
            }
            out.push(ActionCommand::new(if o.readable.is_some() { V::Read } else { V::LookAt }, &[n]));
            if o.edible {
                out.push(ActionCommand::new(V::Eat, &[n]));
            }
            if o.flushable {
                out.push(ActionCommand::new(V::Flush, &[n]));
            }
            if o.container.is_some() {
                out.push(ActionCommand::new(V::Mix, &[n]));
            }
            if tools.contains(n) {
                out.push(ActionCommand::new(V::Use, &[n]));
                for t in &visible {
                    if t.name != o.name {
                        out.push(ActionCommand::new(V::Use, &[n, &t.name]));
                    }
                }
            }
            for c in &visible {
                if c.name == o.name || c.container.is_none() || !self.open.contains(&c.name) {
                    continue;
                }
                if o.portable {
                    out.push(ActionCommand::new(V::Move, &[n, &c.name]));
                }
                if o.liquid || o.container.is_some() {
                    out.push(ActionCommand::new(V::Pour, &[n, &c.name]));
                }
            }
            if o.conductive {
                for p in &visible {
                    if p.conductive && o.name < p.name {
                        out.push(ActionCommand::new(V::Connect, &[n, &p.name]));
                    }
                }
            }
        }
        out
    }
}

fn contains_words(haystack: &str, needle: &str) -> bool {
    if needle.is_empty() {
        return false;
    }
    let hay = alloc::format!(" {haystack} ");
    hay.contains(&alloc::format!(" {needle} "))
}

fn join_and(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => alloc::format!("{} and {last}", init.join(", ")),
    }
}

fn list_or_nothing(items: &[String]) -> String {
    if items.is_empty() {
        "nothing".to_owned()
    } else {
        join_and(items)
    }
}

/// Environment over a library of world definitions.
#[derive(Debug, Clone)]
pub struct TextWorld {
    library: Vec<WorldDef>,
    active: Option<(usize, WorldState)>,
}

impl TextWorld {
    pub fn new(library: Vec<WorldDef>) -> Self {
        TextWorld { library, active: None }
    }

    pub fn def(&self, task_id: &str) -> Option<&WorldDef> {
        self.library.iter().find(|d| d.task_id == task_id)
    }

    pub fn state(&self) -> Option<&WorldState> {
        self.active.as_ref().map(|(_, s)| s)
    }

    fn current_def(&self) -> Option<&WorldDef> {
        self.active.as_ref().map(|(i, _)| &self.library[*i])
    }

    /// Grammar parse plus resolution of object phrases to world names
    /// (unresolvable phrases are kept as written).
    pub fn parse_action(&self, text: &str) -> Result<ActionCommand, ActionParseError> {
        let mut cmd = parse_command(text)?;
        if let (Some(def), Some(state)) = (self.current_def(), self.state()) {
            for arg in &mut cmd.args {
                let resolved = match cmd.verb {
                    ActionVerb::GoTo | ActionVerb::Teleport => WorldState::resolve_room(def, arg).map(str::to_owned),
                    ActionVerb::Wait => None,
                    _ => state.resolve_object(def, arg).map(|o| o.name.clone()),
                };
                if let Some(name) = resolved {
                    *arg = name;
                }
            }
        }
        Ok(cmd)
    }
}

impl Environment for TextWorld {
    fn reset(&mut self, task_id: &str, variation_seed: u64) -> Result<String, EnvError> {
        let index = self.library.iter().position(|d| d.task_id == task_id).ok_or_else(|| EnvError::UnknownTask(task_id.to_owned()))?;
        let def = &self.library[index];
        let state = WorldState::initial(def, variation_seed);
        let observation = alloc::format!("{}\n\n{}", def.description, state.describe_room(def));
        self.active = Some((index, state));
        Ok(observation)
    }

    fn step(&mut self, action: &ActionCommand) -> Result<StepOutcome, EnvError> {
        let (index, state) = self.active.as_mut().ok_or(EnvError::NotReset)?;
        if state.terminal {
            return Err(EnvError::EpisodeOver);
        }
        Ok(state.apply(&self.library[*index], action))
    }
}
