//! Simulated apartment worlds: the world file format, metric validation of
//! travel distances, and a deterministic skill backend the executor can drive.
//!
//! A world file is ground truth. Loading it produces the robot's *initial
//! belief* as a [`KnowledgeBase`] — objects marked `"known": false` exist in
//! the simulation but not in the KB, and only enter it through a successful
//! `find`. That gap is what exercises the open-world machinery.

use crate::executor::{AbortHandle, ExecError, FailureClass, SkillOutcome, Skills};
use crate::kb::{KnowledgeBase, Origin, Triple, TripleObject, ROBOT};
use crate::ontology::{Ontology, Relation};
use crate::planner::Action;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use thiserror::Error;

/// Symmetric travel-distance lookup with a zero diagonal.
#[derive(Debug, Clone, Default)]
pub struct DistanceTable {
    dist: BTreeMap<(String, String), f64>,
}

impl DistanceTable {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str, f64)>) -> Self {
        let mut dist = BTreeMap::new();
        for (a, b, d) in pairs {
            dist.insert((a.to_string(), b.to_string()), d);
            dist.insert((b.to_string(), a.to_string()), d);
        }
        DistanceTable { dist }
    }

    pub fn get(&self, from: &str, to: &str) -> Option<f64> {
        if from == to {
            return Some(0.0);
        }
        self.dist.get(&(from.to_string(), to.to_string())).copied()
    }

    /// Check that the table is a complete, non-negative metric over
    /// `locations` (symmetry holds by construction; the triangle inequality
    /// and completeness do not).
    pub fn validate_metric(&self, locations: &[String]) -> Result<(), WorldError> {
        for (i, a) in locations.iter().enumerate() {
            for b in &locations[i + 1..] {
                let d = self.get(a, b).ok_or_else(|| {
                    WorldError::MetricViolation(format!("missing distance {a} <-> {b}"))
                })?;
                if !d.is_finite() || d < 0.0 {
                    return Err(WorldError::MetricViolation(format!(
                        "distance {a} <-> {b} is {d}"
                    )));
                }
            }
        }
        for a in locations {
            for b in locations {
                for c in locations {
                    let ab = self.get(a, b).unwrap_or(0.0);
                    let bc = self.get(b, c).unwrap_or(0.0);
                    let ac = self.get(a, c).unwrap_or(0.0);
                    if ac > ab + bc + 1e-9 {
                        return Err(WorldError::MetricViolation(format!(
                            "triangle inequality fails: d({a},{c}) = {ac} > d({a},{b}) + d({b},{c}) = {}",
                            ab + bc
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocationSpec {
    pub id: String,
    /// Ontology class; must be placement-capable (counter, table, shelf, ...).
    pub class: String,
    pub room: String,
}

/// Navigation-only target (a door, the car outside). Not a placement
/// location, so it never hosts objects or hypotheses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaypointSpec {
    pub id: String,
    #[serde(default)]
    pub room: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistancePair {
    pub from: String,
    pub to: String,
    pub meters: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: String,
    pub class: String,
    pub true_location: String,
    /// Whether the robot's initial KB knows where this object is.
    pub known: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PersonSpec {
    pub name: String,
    pub location: String,
    /// Waypoint path the person walks when followed.
    #[serde(default)]
    pub route: Vec<String>,
    /// When true, the person outpaces the robot halfway along the route.
    #[serde(default)]
    pub loses_robot: bool,
    /// Present for symmetry with guided tours; a non-compliant person refuses
    /// to be guided.
    #[serde(default = "default_true")]
    pub compliant: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldSpec {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub robot_start: String,
    pub rooms: Vec<String>,
    pub locations: Vec<LocationSpec>,
    #[serde(default)]
    pub waypoints: Vec<WaypointSpec>,
    pub distances: Vec<DistancePair>,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub people: Vec<PersonSpec>,
}

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("failed to read world: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to decode world: {0}")]
    Json(#[from] serde_json::Error),
    #[error("world schema error: {0}")]
    SchemaError(String),
    #[error("distance table is not a metric: {0}")]
    MetricViolation(String),
}

impl WorldSpec {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, WorldError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn distance_table(&self) -> DistanceTable {
        DistanceTable::from_pairs(
            self.distances
                .iter()
                .map(|d| (d.from.as_str(), d.to.as_str(), d.meters)),
        )
    }

    fn all_place_ids(&self) -> Vec<String> {
        self.locations
            .iter()
            .map(|l| l.id.clone())
            .chain(self.waypoints.iter().map(|w| w.id.clone()))
            .collect()
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let schema = |msg: String| Err(WorldError::SchemaError(msg));
        let mut ids = BTreeSet::new();
        for id in self
            .rooms
            .iter()
            .chain(self.locations.iter().map(|l| &l.id))
            .chain(self.waypoints.iter().map(|w| &w.id))
            .chain(self.objects.iter().map(|o| &o.id))
            .chain(self.people.iter().map(|p| &p.name))
        {
            if !ids.insert(id.clone()) {
                return schema(format!("duplicate id `{id}`"));
            }
        }
        let rooms: BTreeSet<&String> = self.rooms.iter().collect();
        for l in &self.locations {
            if !rooms.contains(&l.room) {
                return schema(format!("location `{}` is in unknown room `{}`", l.id, l.room));
            }
        }
        for w in &self.waypoints {
            if let Some(r) = &w.room {
                if !rooms.contains(r) {
                    return schema(format!("waypoint `{}` is in unknown room `{r}`", w.id));
                }
            }
        }
        let places: BTreeSet<String> = self.all_place_ids().into_iter().collect();
        if !places.contains(&self.robot_start) {
            return schema(format!("robot_start `{}` is not a location", self.robot_start));
        }
        let placements: BTreeSet<&String> = self.locations.iter().map(|l| &l.id).collect();
        for o in &self.objects {
            if !placements.contains(&o.true_location) {
                return schema(format!(
                    "object `{}` sits on `{}` which is not a placement location",
                    o.id, o.true_location
                ));
            }
        }
        for p in &self.people {
            if !places.contains(&p.location) {
                return schema(format!("person `{}` is at unknown place `{}`", p.name, p.location));
            }
            for r in &p.route {
                if !places.contains(r) {
                    return schema(format!("person `{}` route visits unknown place `{r}`", p.name));
                }
            }
        }
        let place_list: Vec<String> = places.into_iter().collect();
        self.distance_table().validate_metric(&place_list)?;
        Ok(())
    }

    /// Build the robot's initial belief state. Classes used by locations and
    /// objects must exist in the standard ontology.
    pub fn initial_kb(&self) -> Result<KnowledgeBase, WorldError> {
        let ontology = Ontology::standard();
        let mut kb = KnowledgeBase::new(ontology);
        let schema = |e: crate::kb::KbError| WorldError::SchemaError(e.to_string());
        for room in &self.rooms {
            kb.add_entity(room, "room", Origin::Observed).map_err(schema)?;
        }
        for l in &self.locations {
            if !kb.ontology().placement_capable(&l.class) {
                return Err(WorldError::SchemaError(format!(
                    "location `{}` has non-placement class `{}`",
                    l.id, l.class
                )));
            }
            kb.add_entity(&l.id, &l.class, Origin::Observed).map_err(schema)?;
            kb.assert_fact(Triple::new(&l.id, Relation::InRoom, TripleObject::entity(&l.room)))
                .map_err(schema)?;
        }
        for w in &self.waypoints {
            kb.add_entity(&w.id, "waypoint", Origin::Observed).map_err(schema)?;
            if let Some(r) = &w.room {
                kb.assert_fact(Triple::new(&w.id, Relation::InRoom, TripleObject::entity(r)))
                    .map_err(schema)?;
            }
        }
        kb.add_entity(ROBOT, "robot", Origin::Observed).map_err(schema)?;
        kb.assert_fact(Triple::at(ROBOT, &self.robot_start)).map_err(schema)?;
        for p in &self.people {
            kb.add_entity(&p.name, "person", Origin::Observed).map_err(schema)?;
            kb.assert_fact(Triple::at(&p.name, &p.location)).map_err(schema)?;
        }
        for o in &self.objects {
            if !kb.ontology().is_subclass(&o.class, "object") {
                return Err(WorldError::SchemaError(format!(
                    "object `{}` has unknown class `{}`",
                    o.id, o.class
                )));
            }
            if o.known {
                kb.add_entity(&o.id, &o.class, Origin::Observed).map_err(schema)?;
                kb.assert_fact(Triple::at(&o.id, &o.true_location)).map_err(schema)?;
            }
        }
        kb.set_travel(self.distance_table());
        Ok(kb)
    }
}

/// Load and validate a world file, returning ground truth and initial belief.
pub fn load_world(path: impl AsRef<Path>) -> Result<(WorldSpec, KnowledgeBase), WorldError> {
    let spec = WorldSpec::from_file(path)?;
    spec.validate()?;
    let kb = spec.initial_kb()?;
    Ok((spec, kb))
}

/// Where an object truly is. The enum makes double-location bugs
/// unrepresentable: an object is somewhere, in the gripper, or with a person.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ObjPlace {
    At(String),
    Held,
    WithPerson(String),
}

/// Deterministic skill backend over a [`WorldSpec`]. Navigation takes
/// `ceil(distance)` ticks and polls the abort flag on every tick; all other
/// skills take one tick.
#[derive(Debug, Clone)]
pub struct SimWorld {
    spec: WorldSpec,
    table: DistanceTable,
    robot_at: String,
    holding: Option<String>,
    object_place: BTreeMap<String, ObjPlace>,
    object_class: BTreeMap<String, String>,
    person_at: BTreeMap<String, String>,
    ticks: u64,
}

impl SimWorld {
    pub fn new(spec: &WorldSpec) -> Self {
        SimWorld {
            table: spec.distance_table(),
            robot_at: spec.robot_start.clone(),
            holding: None,
            object_place: spec
                .objects
                .iter()
                .map(|o| (o.id.clone(), ObjPlace::At(o.true_location.clone())))
                .collect(),
            object_class: spec
                .objects
                .iter()
                .map(|o| (o.id.clone(), o.class.clone()))
                .collect(),
            person_at: spec
                .people
                .iter()
                .map(|p| (p.name.clone(), p.location.clone()))
                .collect(),
            ticks: 0,
            spec: spec.clone(),
        }
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn robot_location(&self) -> &str {
        &self.robot_at
    }

    pub fn holding(&self) -> Option<&str> {
        self.holding.as_deref()
    }

    pub fn object_place(&self, id: &str) -> Option<&ObjPlace> {
        self.object_place.get(id)
    }

    pub fn person_location(&self, name: &str) -> Option<&str> {
        self.person_at.get(name).map(String::as_str)
    }

    /// Every object is in exactly one place and the gripper agrees with the
    /// placement map. Exercised by the property tests after every action.
    pub fn check_conservation(&self) -> bool {
        let held: Vec<&String> = self
            .object_place
            .iter()
            .filter(|(_, p)| **p == ObjPlace::Held)
            .map(|(id, _)| id)
            .collect();
        match &self.holding {
            Some(h) => held.len() == 1 && held[0] == h,
            None => held.is_empty(),
        }
    }

    /// Consume ticks one at a time so an abort lands mid-motion.
    fn spend_ticks(&mut self, n: u64, abort: &AbortHandle) -> Result<(), ExecError> {
        for _ in 0..n.max(1) {
            if abort.is_requested() {
                return Err(ExecError::Aborted);
            }
            self.ticks += 1;
        }
        Ok(())
    }

    fn travel_ticks(&self, from: &str, to: &str) -> u64 {
        self.table.get(from, to).map(|d| d.ceil() as u64).unwrap_or(1).max(1)
    }

    fn do_navigate(
        &mut self,
        to: &str,
        kb: &mut KnowledgeBase,
        abort: &AbortHandle,
    ) -> Result<SkillOutcome, ExecError> {
        if self.table.get(&self.robot_at, to).is_none() {
            return Err(ExecError::UnknownTarget(to.to_string()));
        }
        let ticks = self.travel_ticks(&self.robot_at.clone(), to);
        self.spend_ticks(ticks, abort)?;
        self.robot_at = to.to_string();
        kb.assert_fact(Triple::at(ROBOT, to))?;
        Ok(SkillOutcome::Success)
    }

    /// Perceive at the current location. For a hypothetical target this scans
    /// ground truth for any object of the same class here; a hit registers
    /// the real object in the KB, which confirms the hypothesis and aliases
    /// the guessed id to the observed one.
    fn do_find(
        &mut self,
        target: &str,
        kb: &mut KnowledgeBase,
        abort: &AbortHandle,
    ) -> Result<SkillOutcome, ExecError> {
        self.spend_ticks(1, abort)?;
        let resolved = kb.resolve(target).to_string();
        if let Some(loc) = self.person_at.get(&resolved) {
            if loc == &self.robot_at {
                kb.assert_fact(Triple::at(&resolved, loc))?;
                return Ok(SkillOutcome::Success);
            }
            return Ok(SkillOutcome::Failure(FailureClass::NotFound));
        }
        let class = kb
            .class_of(&resolved)
            .ok_or_else(|| ExecError::UnknownTarget(target.to_string()))?
            .to_string();
        let here = self.robot_at.clone();
        // Direct hit on a concrete object the sim knows by id?
        if self.object_place.get(&resolved) == Some(&ObjPlace::At(here.clone())) {
            kb.assert_fact(Triple::at(&resolved, &here))?;
            return Ok(SkillOutcome::Success);
        }
        // Otherwise scan for any instance of the class at this location.
        let hit = self
            .object_place
            .iter()
            .filter(|(_, p)| **p == ObjPlace::At(here.clone()))
            .find(|(id, _)| self.object_class.get(*id).is_some_and(|c| c == &class))
            .map(|(id, _)| id.clone());
        match hit {
            Some(id) => {
                let class = self.object_class[&id].clone();
                if kb.entity(&id).is_none() {
                    kb.add_entity(&id, &class, Origin::Observed)?;
                }
                kb.assert_fact(Triple::at(&id, &here))?;
                Ok(SkillOutcome::Success)
            }
            None => Ok(SkillOutcome::Failure(FailureClass::NotFound)),
        }
    }

    fn do_pick(
        &mut self,
        object: &str,
        kb: &mut KnowledgeBase,
        abort: &AbortHandle,
    ) -> Result<SkillOutcome, ExecError> {
        self.spend_ticks(1, abort)?;
        if self.holding.is_some() {
            return Ok(SkillOutcome::Failure(FailureClass::HandOccupied));
        }
        let id = kb.resolve(object).to_string();
        if self.object_place.get(&id) != Some(&ObjPlace::At(self.robot_at.clone())) {
            return Ok(SkillOutcome::Failure(FailureClass::NotFound));
        }
        self.object_place.insert(id.clone(), ObjPlace::Held);
        self.holding = Some(id.clone());
        kb.retract_fact(&Triple::at(&id, &self.robot_at.clone()));
        kb.assert_fact(Triple::new(ROBOT, Relation::Holds, TripleObject::entity(&id)))?;
        Ok(SkillOutcome::Success)
    }

    fn do_place(
        &mut self,
        object: &str,
        location: &str,
        kb: &mut KnowledgeBase,
        abort: &AbortHandle,
    ) -> Result<SkillOutcome, ExecError> {
        self.spend_ticks(1, abort)?;
        let id = kb.resolve(object).to_string();
        if self.holding.as_deref() != Some(id.as_str()) {
            return Ok(SkillOutcome::Failure(FailureClass::NotHolding));
        }
        if self.robot_at != location {
            return Ok(SkillOutcome::Failure(FailureClass::NotAtLocation));
        }
        self.object_place.insert(id.clone(), ObjPlace::At(location.to_string()));
        self.holding = None;
        kb.retract_fact(&Triple::new(ROBOT, Relation::Holds, TripleObject::entity(&id)));
        kb.assert_fact(Triple::at(&id, location))?;
        Ok(SkillOutcome::Success)
    }

    fn do_handover(
        &mut self,
        object: &str,
        person: &str,
        kb: &mut KnowledgeBase,
        abort: &AbortHandle,
    ) -> Result<SkillOutcome, ExecError> {
        self.spend_ticks(1, abort)?;
        let id = kb.resolve(object).to_string();
        if self.holding.as_deref() != Some(id.as_str()) {
            return Ok(SkillOutcome::Failure(FailureClass::NotHolding));
        }
        if self.person_at.get(person) != Some(&self.robot_at) {
            return Ok(SkillOutcome::Failure(FailureClass::NotCoLocated));
        }
        self.object_place.insert(id.clone(), ObjPlace::WithPerson(person.to_string()));
        self.holding = None;
        kb.retract_fact(&Triple::new(ROBOT, Relation::Holds, TripleObject::entity(&id)));
        kb.assert_fact(Triple::new(person, Relation::Holds, TripleObject::entity(&id)))?;
        Ok(SkillOutcome::Success)
    }

    fn do_guide(
        &mut self,
        person: &str,
        to: &str,
        kb: &mut KnowledgeBase,
        abort: &AbortHandle,
    ) -> Result<SkillOutcome, ExecError> {
        if self.person_at.get(person) != Some(&self.robot_at) {
            self.spend_ticks(1, abort)?;
            return Ok(SkillOutcome::Failure(FailureClass::NotCoLocated));
        }
        let compliant = self
            .spec
            .people
            .iter()
            .find(|p| p.name == person)
            .is_none_or(|p| p.compliant);
        if !compliant {
            self.spend_ticks(1, abort)?;
            return Ok(SkillOutcome::Failure(FailureClass::PersonLost));
        }
        let ticks = self.travel_ticks(&self.robot_at.clone(), to);
        self.spend_ticks(ticks, abort)?;
        self.robot_at = to.to_string();
        self.person_at.insert(person.to_string(), to.to_string());
        kb.assert_fact(Triple::at(ROBOT, to))?;
        kb.assert_fact(Triple::at(person, to))?;
        Ok(SkillOutcome::Success)
    }

    fn do_follow(
        &mut self,
        person: &str,
        kb: &mut KnowledgeBase,
        abort: &AbortHandle,
    ) -> Result<SkillOutcome, ExecError> {
        if self.person_at.get(person) != Some(&self.robot_at) {
            self.spend_ticks(1, abort)?;
            return Ok(SkillOutcome::Failure(FailureClass::NotCoLocated));
        }
        let spec = self.spec.people.iter().find(|p| p.name == person).cloned();
        let route = spec.as_ref().map(|p| p.route.clone()).unwrap_or_default();
        let loses = spec.as_ref().is_some_and(|p| p.loses_robot);
        if route.is_empty() {
            self.spend_ticks(1, abort)?;
            return Ok(SkillOutcome::Success);
        }
        let keep_up = if loses { route.len() / 2 } else { route.len() };
        for (i, wp) in route.iter().enumerate() {
            self.spend_ticks(1, abort)?;
            self.person_at.insert(person.to_string(), wp.clone());
            if i < keep_up {
                self.robot_at = wp.clone();
            }
        }
        kb.assert_fact(Triple::at(ROBOT, &self.robot_at.clone()))?;
        kb.assert_fact(Triple::at(person, &route[route.len() - 1].clone()))?;
        if loses {
            Ok(SkillOutcome::Failure(FailureClass::PersonLost))
        } else {
            Ok(SkillOutcome::Success)
        }
    }

    fn do_say(
        &mut self,
        person: &str,
        abort: &AbortHandle,
    ) -> Result<SkillOutcome, ExecError> {
        self.spend_ticks(1, abort)?;
        if self.person_at.get(person) != Some(&self.robot_at) {
            return Ok(SkillOutcome::Failure(FailureClass::NotCoLocated));
        }
        Ok(SkillOutcome::Success)
    }
}

impl Skills for SimWorld {
    fn dispatch(
        &mut self,
        action: &Action,
        kb: &mut KnowledgeBase,
        abort: &AbortHandle,
    ) -> Result<SkillOutcome, ExecError> {
        match action {
            Action::Navigate { to } => self.do_navigate(to, kb, abort),
            Action::Find { object } => self.do_find(object, kb, abort),
            Action::Pick { object } => self.do_pick(object, kb, abort),
            Action::Place { object, location } => self.do_place(object, location, kb, abort),
            Action::Handover { object, person } => self.do_handover(object, person, kb, abort),
            Action::Guide { person, to } => self.do_guide(person, to, kb, abort),
            Action::Follow { person } => self.do_follow(person, kb, abort),
            Action::Say { person, .. } => self.do_say(person, abort),
        }
    }
}
