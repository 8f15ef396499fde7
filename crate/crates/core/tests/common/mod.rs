//! A deliberately naive uniform-cost search over the explicit task state
//! graph, plus a random small-world generator. The search re-derives the
//! action semantics from the world description alone, giving the planner an
//! independent implementation to be measured against.

// Shared by the acceptance and property suites; not every target uses every
// helper.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use majordomo::ontology::Ontology;
use majordomo::planner::{Goal, GoalAtom, ObjTerm, PlaceTerm};
use majordomo::sim::{DistancePair, LocationSpec, ObjectSpec, PersonSpec, WaypointSpec, WorldSpec};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Static facts the oracle reads straight off the world description.
pub struct OracleWorld {
    places: Vec<String>,
    placement: BTreeSet<String>,
    room_of: BTreeMap<String, String>,
    dist: BTreeMap<(String, String), f64>,
    class_of: BTreeMap<String, String>,
    ontology: Ontology,
}

impl OracleWorld {
    pub fn from_spec(spec: &WorldSpec) -> OracleWorld {
        let mut places = Vec::new();
        let mut placement = BTreeSet::new();
        let mut room_of = BTreeMap::new();
        let mut class_of = BTreeMap::new();
        for l in &spec.locations {
            places.push(l.id.clone());
            placement.insert(l.id.clone());
            room_of.insert(l.id.clone(), l.room.clone());
            class_of.insert(l.id.clone(), l.class.clone());
        }
        for w in &spec.waypoints {
            places.push(w.id.clone());
            if let Some(r) = &w.room {
                room_of.insert(w.id.clone(), r.clone());
            }
        }
        let mut dist = BTreeMap::new();
        for d in &spec.distances {
            dist.insert((d.from.clone(), d.to.clone()), d.meters);
            dist.insert((d.to.clone(), d.from.clone()), d.meters);
        }
        for o in &spec.objects {
            class_of.insert(o.id.clone(), o.class.clone());
        }
        OracleWorld {
            places,
            placement,
            room_of,
            dist,
            class_of,
            ontology: Ontology::standard(),
        }
    }

    fn travel(&self, from: &str, to: &str) -> f64 {
        if from == to {
            0.0
        } else {
            *self.dist.get(&(from.to_string(), to.to_string())).expect("complete table")
        }
    }

    fn matches_class(&self, id: &str, class: &str) -> bool {
        self.class_of
            .get(id)
            .is_some_and(|c| self.ontology.is_subclass(c, class))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct OracleState {
    robot: String,
    holding: Option<String>,
    objects: BTreeMap<String, String>,
    people: BTreeMap<String, String>,
    verified: BTreeSet<String>,
    delivered: BTreeMap<String, String>,
    said: BTreeSet<(String, String)>,
    following: Option<String>,
}

impl OracleState {
    fn initial(spec: &WorldSpec) -> OracleState {
        OracleState {
            robot: spec.robot_start.clone(),
            holding: None,
            objects: spec
                .objects
                .iter()
                .filter(|o| o.known)
                .map(|o| (o.id.clone(), o.true_location.clone()))
                .collect(),
            people: spec.people.iter().map(|p| (p.name.clone(), p.location.clone())).collect(),
            verified: BTreeSet::new(),
            delivered: BTreeMap::new(),
            said: BTreeSet::new(),
            following: None,
        }
    }

    fn candidates(&self, term: &ObjTerm, world: &OracleWorld) -> Vec<String> {
        match term {
            ObjTerm::Instance(id) => vec![id.clone()],
            ObjTerm::AnyOf { class } => {
                let mut ids: BTreeSet<&String> = self.objects.keys().collect();
                ids.extend(self.delivered.keys());
                if let Some(h) = &self.holding {
                    ids.insert(h);
                }
                ids.into_iter()
                    .filter(|id| world.matches_class(id, class))
                    .cloned()
                    .collect()
            }
        }
    }

    fn satisfied(&self, atom: &GoalAtom, world: &OracleWorld) -> bool {
        match atom {
            GoalAtom::Delivered { object, to } => self
                .candidates(object, world)
                .iter()
                .any(|o| self.delivered.get(o) == Some(to)),
            GoalAtom::ObjectAt { object, location } => self
                .candidates(object, world)
                .iter()
                .any(|o| self.objects.get(o) == Some(location)),
            GoalAtom::Found { object } => self
                .candidates(object, world)
                .iter()
                .any(|o| self.verified.contains(o)),
            GoalAtom::PersonAt { person, place } => match (self.people.get(person), place) {
                (Some(at), PlaceTerm::Location(l)) => at == l,
                (Some(at), PlaceTerm::Room(r)) => world.room_of.get(at) == Some(r),
                (None, _) => false,
            },
            GoalAtom::Following { person } => self.following.as_deref() == Some(person),
            GoalAtom::Said { person, phrase } => {
                self.said.contains(&(person.clone(), phrase.clone()))
            }
            GoalAtom::RobotInRoom(room) => world.room_of.get(&self.robot) == Some(room),
        }
    }

    fn satisfies(&self, goal: &Goal, world: &OracleWorld) -> bool {
        goal.atoms.iter().all(|a| self.satisfied(a, world))
    }
}

struct Node {
    cost: f64,
    seq: u64,
    state: OracleState,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cost.total_cmp(&other.cost).is_eq() && self.seq == other.seq
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // BinaryHeap is a max-heap; reverse for cheapest-first
        self.cost.total_cmp(&other.cost).then_with(|| self.seq.cmp(&other.seq)).reverse()
    }
}

fn term_matches(world: &OracleWorld, term: &ObjTerm, id: &str) -> bool {
    match term {
        ObjTerm::Instance(i) => i == id,
        ObjTerm::AnyOf { class } => world.matches_class(id, class),
    }
}

/// Moving an entity no goal term mentions can be deleted from any plan
/// without invalidating it, so such moves never appear in an optimal plan
/// and the search skips them. The planner proper applies the same cut.
fn object_relevant(goal: &Goal, world: &OracleWorld, id: &str) -> bool {
    goal.atoms.iter().any(|atom| match atom {
        GoalAtom::Delivered { object, .. }
        | GoalAtom::ObjectAt { object, .. }
        | GoalAtom::Found { object } => term_matches(world, object, id),
        _ => false,
    })
}

fn found_candidate(goal: &Goal, world: &OracleWorld, id: &str) -> bool {
    goal.atoms.iter().any(|atom| match atom {
        GoalAtom::Found { object } => term_matches(world, object, id),
        _ => false,
    })
}

fn delivery_target(goal: &Goal, person: &str) -> bool {
    goal.atoms.iter().any(|atom| matches!(atom, GoalAtom::Delivered { to, .. } if to == person))
}

fn expand(state: &OracleState, goal: &Goal, world: &OracleWorld) -> Vec<(f64, OracleState)> {
    let here = state.robot.clone();
    let mut out = Vec::new();

    // perceive a co-located object or person a Found goal asks about
    for (id, loc) in state.objects.iter().chain(state.people.iter()) {
        if loc == &here && !state.verified.contains(id) && found_candidate(goal, world, id) {
            let mut s = state.clone();
            s.verified.insert(id.clone());
            out.push((1.0, s));
        }
    }
    // start following, if the goal asks for it
    for atom in &goal.atoms {
        if let GoalAtom::Following { person } = atom {
            if state.people.get(person) == Some(&here)
                && state.following.as_deref() != Some(person)
            {
                let mut s = state.clone();
                s.following = Some(person.clone());
                out.push((1.0, s));
            }
        }
    }
    // escort a co-located person to a goal-sanctioned destination
    for atom in &goal.atoms {
        if let GoalAtom::PersonAt { person, place } = atom {
            if state.people.get(person) != Some(&here) {
                continue;
            }
            let destinations: Vec<&String> = match place {
                PlaceTerm::Location(l) => vec![l],
                PlaceTerm::Room(r) => world
                    .places
                    .iter()
                    .filter(|p| world.room_of.get(*p) == Some(r))
                    .collect(),
            };
            for to in destinations {
                if to != &here {
                    let mut s = state.clone();
                    s.robot = to.clone();
                    s.people.insert(person.clone(), to.clone());
                    out.push((1.0, s));
                }
            }
        }
    }
    // hand the held object to a co-located delivery recipient
    if let Some(held) = &state.holding {
        for (person, loc) in &state.people {
            if loc == &here && delivery_target(goal, person) {
                let mut s = state.clone();
                s.holding = None;
                s.delivered.insert(held.clone(), person.clone());
                out.push((1.0, s));
            }
        }
    }
    // drive anywhere else
    for to in &world.places {
        if to != &here {
            let mut s = state.clone();
            s.robot = to.clone();
            out.push((world.travel(&here, to), s));
        }
    }
    // grasp a goal-relevant object lying here
    if state.holding.is_none() {
        for (obj, loc) in &state.objects {
            if loc == &here && object_relevant(goal, world, obj) {
                let mut s = state.clone();
                s.holding = Some(obj.clone());
                s.objects.remove(obj);
                out.push((1.0, s));
            }
        }
    }
    // set the held object down on a placement surface
    if let Some(held) = &state.holding {
        if world.placement.contains(&here) {
            let mut s = state.clone();
            s.holding = None;
            s.objects.insert(held.clone(), here.clone());
            out.push((1.0, s));
        }
    }
    // speak a goal phrase to a co-located person
    for atom in &goal.atoms {
        if let GoalAtom::Said { person, phrase } = atom {
            let key = (person.clone(), phrase.clone());
            if state.people.get(person) == Some(&here) && !state.said.contains(&key) {
                let mut s = state.clone();
                s.said.insert(key);
                out.push((1.0, s));
            }
        }
    }
    out
}

/// Cheapest cost to reach the goal, or `None` when no state satisfies it.
pub fn oracle_cost(spec: &WorldSpec, goal: &Goal) -> Option<f64> {
    let world = OracleWorld::from_spec(spec);
    let start = OracleState::initial(spec);
    let mut heap = BinaryHeap::new();
    let mut best: BTreeMap<OracleState, f64> = BTreeMap::new();
    let mut seq = 0u64;
    best.insert(start.clone(), 0.0);
    heap.push(Node { cost: 0.0, seq, state: start });
    while let Some(Node { cost, state, .. }) = heap.pop() {
        if state.satisfies(goal, &world) {
            return Some(cost);
        }
        if best.get(&state).is_some_and(|&b| cost > b + 1e-9) {
            continue;
        }
        for (step, next) in expand(&state, goal, &world) {
            let c = cost + step;
            if best.get(&next).is_none_or(|&b| c + 1e-9 < b) {
                best.insert(next.clone(), c);
                seq += 1;
                heap.push(Node { cost: c, seq, state: next });
            }
        }
    }
    None
}

const LOCATION_CLASSES: &[&str] =
    &["table", "counter", "shelf", "cupboard", "sofa", "bed", "desk", "bookshelf", "stand", "bar"];
const OBJECT_CLASSES: &[&str] =
    &["apple", "orange", "pear", "banana", "juice", "milk", "cereal", "crackers"];
const GOAL_CLASSES: &[&str] =
    &["apple", "orange", "juice", "milk", "cereal", "fruit", "drink", "snack", "object"];
const PEOPLE: &[&str] = &["amy", "jan"];
const PHRASES: &[&str] = &["good morning", "dinner is served"];

/// A random apartment capped at 4 rooms, 6 locations and 5 objects, with a
/// Euclidean (hence metric) distance table drawn from random floor positions.
pub fn random_world(rng: &mut ChaCha8Rng) -> WorldSpec {
    let n_rooms = rng.random_range(1..=4usize);
    let rooms: Vec<String> = (0..n_rooms).map(|i| format!("room-{i}")).collect();
    let n_locs = rng.random_range(1..=6usize);
    let locations: Vec<LocationSpec> = (0..n_locs)
        .map(|i| LocationSpec {
            id: format!("loc-{i}"),
            class: LOCATION_CLASSES[rng.random_range(0..LOCATION_CLASSES.len())].to_string(),
            room: rooms[rng.random_range(0..rooms.len())].clone(),
        })
        .collect();
    let n_ways = rng.random_range(0..=2usize);
    let waypoints: Vec<WaypointSpec> = (0..n_ways)
        .map(|i| WaypointSpec {
            id: format!("way-{i}"),
            room: if rng.random_range(0..2) == 0 {
                Some(rooms[rng.random_range(0..rooms.len())].clone())
            } else {
                None
            },
        })
        .collect();

    let place_ids: Vec<String> = locations
        .iter()
        .map(|l| l.id.clone())
        .chain(waypoints.iter().map(|w| w.id.clone()))
        .collect();
    let coords: Vec<(f64, f64)> = place_ids
        .iter()
        .map(|_| (rng.random_range(0.0..15.0), rng.random_range(0.0..15.0)))
        .collect();
    let mut distances = Vec::new();
    for i in 0..place_ids.len() {
        for j in (i + 1)..place_ids.len() {
            let (xa, ya) = coords[i];
            let (xb, yb) = coords[j];
            distances.push(DistancePair {
                from: place_ids[i].clone(),
                to: place_ids[j].clone(),
                meters: ((xa - xb).powi(2) + (ya - yb).powi(2)).sqrt(),
            });
        }
    }

    let n_objs = rng.random_range(0..=5usize);
    let objects: Vec<ObjectSpec> = (0..n_objs)
        .map(|i| ObjectSpec {
            id: format!("obj-{i}"),
            class: OBJECT_CLASSES[rng.random_range(0..OBJECT_CLASSES.len())].to_string(),
            true_location: locations[rng.random_range(0..locations.len())].id.clone(),
            known: true,
        })
        .collect();
    let n_people = rng.random_range(0..=2usize);
    let people: Vec<PersonSpec> = (0..n_people)
        .map(|i| PersonSpec {
            name: PEOPLE[i].to_string(),
            location: place_ids[rng.random_range(0..place_ids.len())].clone(),
            route: Vec::new(),
            loses_robot: false,
            compliant: true,
        })
        .collect();

    WorldSpec {
        name: "random".into(),
        seed: 0,
        robot_start: place_ids[rng.random_range(0..place_ids.len())].clone(),
        rooms,
        locations,
        waypoints,
        distances,
        objects,
        people,
    }
}

fn random_obj_term(rng: &mut ChaCha8Rng, spec: &WorldSpec) -> ObjTerm {
    if !spec.objects.is_empty() && rng.random_range(0..2) == 0 {
        let o = &spec.objects[rng.random_range(0..spec.objects.len())];
        ObjTerm::Instance(o.id.clone())
    } else {
        ObjTerm::AnyOf { class: GOAL_CLASSES[rng.random_range(0..GOAL_CLASSES.len())].to_string() }
    }
}

fn random_atom(rng: &mut ChaCha8Rng, spec: &WorldSpec) -> GoalAtom {
    let person = |rng: &mut ChaCha8Rng| {
        spec.people[rng.random_range(0..spec.people.len())].name.clone()
    };
    for _ in 0..16 {
        match rng.random_range(0..7) {
            0 => {
                return GoalAtom::RobotInRoom(
                    spec.rooms[rng.random_range(0..spec.rooms.len())].clone(),
                )
            }
            1 if !spec.people.is_empty() => {
                return GoalAtom::Delivered {
                    object: random_obj_term(rng, spec),
                    to: person(rng),
                }
            }
            2 if !spec.locations.is_empty() => {
                return GoalAtom::ObjectAt {
                    object: random_obj_term(rng, spec),
                    location: spec.locations[rng.random_range(0..spec.locations.len())]
                        .id
                        .clone(),
                }
            }
            3 => return GoalAtom::Found { object: random_obj_term(rng, spec) },
            4 if !spec.people.is_empty() => {
                let place = if rng.random_range(0..2) == 0 {
                    PlaceTerm::Room(spec.rooms[rng.random_range(0..spec.rooms.len())].clone())
                } else {
                    PlaceTerm::Location(
                        spec.locations[rng.random_range(0..spec.locations.len())].id.clone(),
                    )
                };
                return GoalAtom::PersonAt { person: person(rng), place };
            }
            5 if !spec.people.is_empty() => {
                return GoalAtom::Following { person: person(rng) }
            }
            6 if !spec.people.is_empty() => {
                return GoalAtom::Said {
                    person: person(rng),
                    phrase: PHRASES[rng.random_range(0..PHRASES.len())].to_string(),
                }
            }
            _ => {}
        }
    }
    GoalAtom::RobotInRoom(spec.rooms[0].clone())
}

/// One or two random atoms over the world's entities; some are unsatisfiable
/// on purpose, which both searches must agree on too.
pub fn random_goal(rng: &mut ChaCha8Rng, spec: &WorldSpec) -> Goal {
    let mut atoms = vec![random_atom(rng, spec)];
    if rng.random_range(0..4) == 0 {
        atoms.push(random_atom(rng, spec));
    }
    Goal { atoms, assumption: None }
}
