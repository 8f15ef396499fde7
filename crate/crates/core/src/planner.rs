//! Forward-search task planner over the robot's belief state.
//!
//! Plans are found with A*: unit cost for every action except `navigate`,
//! which costs its travel distance, plus an admissible remaining-travel
//! heuristic. Ties break on the lexicographically smallest action sequence,
//! so plans are fully deterministic. When the goal references an object the
//! KB only hypothesises about, the planner *commits* to the cheapest open
//! hypothesis and plans as if that guess were true; a failed `find` later
//! refutes the guess and replanning commits to the next one.

use crate::kb::{DiagnosisReport, KbError, KnowledgeBase, Origin, Pattern};
use crate::ontology::Relation;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;
use thiserror::Error;

/// Ground action, the executor's unit of dispatch. Variants are declared in
/// alphabetical order and arguments are plain ids, so the derived `Ord` gives
/// the deterministic tie-break order used by the search.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Action {
    Find { object: String },
    Follow { person: String },
    Guide { person: String, to: String },
    Handover { object: String, person: String },
    Navigate { to: String },
    Pick { object: String },
    Place { object: String, location: String },
    Say { phrase: String, person: String },
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Find { object } => write!(f, "find({object})"),
            Action::Follow { person } => write!(f, "follow({person})"),
            Action::Guide { person, to } => write!(f, "guide({person}, {to})"),
            Action::Handover { object, person } => write!(f, "handover({object}, {person})"),
            Action::Navigate { to } => write!(f, "navigate({to})"),
            Action::Pick { object } => write!(f, "pick({object})"),
            Action::Place { object, location } => write!(f, "place({object}, {location})"),
            Action::Say { phrase, person } => write!(f, "say({phrase}, {person})"),
        }
    }
}

/// Object reference in a goal: a concrete instance, or any member of a class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjTerm {
    Instance(String),
    AnyOf { class: String },
}

impl fmt::Display for ObjTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjTerm::Instance(id) => f.write_str(id),
            ObjTerm::AnyOf { class } => write!(f, "any {class}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaceTerm {
    Room(String),
    Location(String),
}

impl fmt::Display for PlaceTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlaceTerm::Room(r) => write!(f, "room {r}"),
            PlaceTerm::Location(l) => f.write_str(l),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalAtom {
    /// Some matching object has been handed to `to`.
    Delivered { object: ObjTerm, to: String },
    /// Some matching object sits at `location`.
    ObjectAt { object: ObjTerm, location: String },
    /// Some matching entity has been perceived this task.
    Found { object: ObjTerm },
    /// The person has been escorted into the room / to the location.
    PersonAt { person: String, place: PlaceTerm },
    /// The robot is following the person.
    Following { person: String },
    /// The phrase has been spoken to the person.
    Said { person: String, phrase: String },
    /// The robot stands somewhere in the room.
    RobotInRoom(String),
}

impl fmt::Display for GoalAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GoalAtom::Delivered { object, to } => write!(f, "delivered({object}, {to})"),
            GoalAtom::ObjectAt { object, location } => write!(f, "object-at({object}, {location})"),
            GoalAtom::Found { object } => write!(f, "found({object})"),
            GoalAtom::PersonAt { person, place } => write!(f, "person-at({person}, {place})"),
            GoalAtom::Following { person } => write!(f, "following({person})"),
            GoalAtom::Said { person, phrase } => write!(f, "said({phrase}, {person})"),
            GoalAtom::RobotInRoom(room) => write!(f, "robot-in-room({room})"),
        }
    }
}

/// Conjunction of goal atoms, plus the assumption the goal depends on when
/// its object exists only hypothetically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Goal {
    pub atoms: Vec<GoalAtom>,
    #[serde(default)]
    pub assumption: Option<String>,
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.atoms.iter().map(|a| a.to_string()).collect();
        f.write_str(&parts.join(" & "))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub actions: Vec<Action>,
    pub cost: f64,
    /// The hypothesis this plan is betting on, if any.
    pub hypothesis: Option<String>,
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("no plan reaches the goal")]
    NoPlan,
    #[error("the robot's own location is unknown")]
    MissingRobot,
    #[error("no placement location available for storing")]
    NoStorage,
    #[error(transparent)]
    Kb(#[from] KbError),
}

/// Outcome of replanning after a refutation.
#[derive(Debug)]
pub enum Replan {
    NewPlan(Plan),
    /// Nothing left to try; report what was learned instead.
    Diagnose(DiagnosisReport),
}

/// Dynamic part of the search state. Static context (distances, rooms,
/// sanctioned guide targets) lives in [`Ctx`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct State {
    robot_at: String,
    holding: Option<String>,
    /// Believed placements; objects in hand or already handed over are absent.
    object_at: BTreeMap<String, String>,
    person_at: BTreeMap<String, String>,
    /// Objects the robot may pick: observed ones plus anything found so far.
    pickable: BTreeSet<String>,
    /// Entities perceived during *this* task (what `Found` goals ask for).
    verified: BTreeSet<String>,
    delivered: BTreeMap<String, String>,
    said: BTreeSet<(String, String)>,
    following: Option<String>,
}

struct Ctx<'a> {
    kb: &'a KnowledgeBase,
    locations: Vec<String>,
    /// (person, destination) pairs the goal sanctions guiding. Guiding is a
    /// unit-cost move for two bodies, so the search only ever considers it
    /// when the goal asks for that exact escort.
    guide_requests: BTreeSet<(String, String)>,
    /// People named as delivery recipients; handing anything to anyone else
    /// only loses the object.
    delivery_targets: BTreeSet<String>,
    goal: &'a [GoalAtom],
}

impl Ctx<'_> {
    /// Whether any goal term could be satisfied by this object. Actions that
    /// move unrelated objects can be cut from any plan without breaking it,
    /// so the search never proposes them; this is what keeps the state graph
    /// from branching over every picked-up-and-put-back permutation.
    fn object_relevant(&self, id: &str) -> bool {
        self.goal.iter().any(|atom| {
            let term = match atom {
                GoalAtom::Delivered { object, .. }
                | GoalAtom::ObjectAt { object, .. }
                | GoalAtom::Found { object } => object,
                _ => return false,
            };
            self.term_matches(term, id)
        })
    }

    /// Whether a `find` of this entity can serve a `Found` goal.
    fn found_candidate(&self, id: &str) -> bool {
        self.goal.iter().any(|atom| {
            let GoalAtom::Found { object } = atom else { return false };
            self.term_matches(object, id)
        })
    }

    fn term_matches(&self, term: &ObjTerm, id: &str) -> bool {
        match term {
            ObjTerm::Instance(i) => i == id,
            ObjTerm::AnyOf { class } => self
                .kb
                .class_of(id)
                .is_some_and(|c| self.kb.ontology().is_subclass(c, class)),
        }
    }
}

impl State {
    fn from_kb(kb: &KnowledgeBase) -> Result<State, PlanError> {
        let robot_at = kb.robot_location().ok_or(PlanError::MissingRobot)?.to_string();
        let mut state = State {
            robot_at,
            holding: None,
            object_at: BTreeMap::new(),
            person_at: BTreeMap::new(),
            pickable: BTreeSet::new(),
            verified: BTreeSet::new(),
            delivered: BTreeMap::new(),
            said: BTreeSet::new(),
            following: None,
        };
        for t in kb.facts() {
            match t.predicate {
                Relation::At => {
                    let Some(loc) = t.object.as_entity() else { continue };
                    if t.subject == crate::kb::ROBOT {
                        continue;
                    }
                    match kb.class_of(&t.subject) {
                        Some(c) if kb.ontology().is_subclass(c, "object") => {
                            let hypothetical = kb
                                .entity(&t.subject)
                                .is_some_and(|e| e.origin == Origin::Hypothetical);
                            if !hypothetical {
                                state.object_at.insert(t.subject.clone(), loc.to_string());
                                state.pickable.insert(t.subject.clone());
                            }
                        }
                        Some("person") => {
                            state.person_at.insert(t.subject.clone(), loc.to_string());
                        }
                        _ => {}
                    }
                }
                Relation::Holds => {
                    let Some(obj) = t.object.as_entity() else { continue };
                    if t.subject == crate::kb::ROBOT {
                        state.holding = Some(obj.to_string());
                        state.pickable.insert(obj.to_string());
                    } else {
                        state.delivered.insert(obj.to_string(), t.subject.clone());
                    }
                }
                _ => {}
            }
        }
        Ok(state)
    }

    /// Entities that can stand in for `term`, drawn from everything this
    /// state tracks a position (or possession) for.
    fn candidates(&self, term: &ObjTerm, kb: &KnowledgeBase) -> Vec<String> {
        match term {
            ObjTerm::Instance(id) => vec![id.clone()],
            ObjTerm::AnyOf { class } => {
                let mut ids: BTreeSet<&String> = self.object_at.keys().collect();
                ids.extend(self.delivered.keys());
                if let Some(h) = &self.holding {
                    ids.insert(h);
                }
                ids.into_iter()
                    .filter(|id| {
                        kb.class_of(id)
                            .is_some_and(|c| kb.ontology().is_subclass(c, class))
                    })
                    .cloned()
                    .collect()
            }
        }
    }

    fn atom_satisfied(&self, atom: &GoalAtom, kb: &KnowledgeBase) -> bool {
        match atom {
            GoalAtom::Delivered { object, to } => self
                .candidates(object, kb)
                .iter()
                .any(|o| self.delivered.get(o) == Some(to)),
            GoalAtom::ObjectAt { object, location } => self
                .candidates(object, kb)
                .iter()
                .any(|o| self.object_at.get(o) == Some(location)),
            GoalAtom::Found { object } => self
                .candidates(object, kb)
                .iter()
                .any(|o| self.verified.contains(o)),
            GoalAtom::PersonAt { person, place } => {
                let Some(at) = self.person_at.get(person) else { return false };
                match place {
                    PlaceTerm::Location(l) => at == l,
                    PlaceTerm::Room(r) => kb.location_room(at) == Some(r),
                }
            }
            GoalAtom::Following { person } => self.following.as_deref() == Some(person),
            GoalAtom::Said { person, phrase } => {
                self.said.contains(&(person.clone(), phrase.clone()))
            }
            GoalAtom::RobotInRoom(room) => kb.location_room(&self.robot_at) == Some(room),
        }
    }

    fn satisfies(&self, goal: &[GoalAtom], kb: &KnowledgeBase) -> bool {
        goal.iter().all(|a| self.atom_satisfied(a, kb))
    }
}

fn travel(kb: &KnowledgeBase, from: &str, to: &str) -> f64 {
    if from == to {
        return 0.0;
    }
    kb.travel().and_then(|t| t.get(from, to)).unwrap_or(1.0)
}

/// Admissible, consistent lower bound on remaining cost: the travel distance
/// the robot cannot avoid. Falls back to zero when unit-cost guiding could
/// move the robot (a guide is cheaper than the distance it covers, which
/// would break admissibility) or when no distance table is loaded.
fn heuristic(state: &State, ctx: &Ctx) -> f64 {
    if ctx.kb.travel().is_none() || !ctx.guide_requests.is_empty() {
        return 0.0;
    }
    let kb = ctx.kb;
    let mut h: f64 = 0.0;
    for atom in ctx.goal {
        if state.atom_satisfied(atom, kb) {
            continue;
        }
        let d = |a: &str, b: &str| travel(kb, a, b);
        let bound = match atom {
            GoalAtom::Delivered { object, to } => match state.person_at.get(to) {
                // no known recipient location: the atom can never be satisfied
                None => f64::INFINITY,
                Some(p_loc) => state
                    .candidates(object, kb)
                    .iter()
                    .map(|o| {
                        if state.holding.as_deref() == Some(o.as_str()) {
                            d(&state.robot_at, p_loc)
                        } else if let Some(o_loc) = state.object_at.get(o) {
                            d(&state.robot_at, o_loc) + d(o_loc, p_loc)
                        } else {
                            f64::INFINITY
                        }
                    })
                    .fold(f64::INFINITY, f64::min),
            },
            GoalAtom::ObjectAt { object, location } => state
                .candidates(object, kb)
                .iter()
                .map(|o| {
                    if state.holding.as_deref() == Some(o.as_str()) {
                        d(&state.robot_at, location)
                    } else if let Some(o_loc) = state.object_at.get(o) {
                        d(&state.robot_at, o_loc) + d(o_loc, location)
                    } else {
                        f64::INFINITY
                    }
                })
                .fold(f64::INFINITY, f64::min),
            GoalAtom::Found { object } => state
                .candidates(object, kb)
                .iter()
                .map(|o| {
                    state
                        .object_at
                        .get(o)
                        .or_else(|| state.person_at.get(o))
                        .map(|loc| d(&state.robot_at, loc))
                        .unwrap_or(f64::INFINITY)
                })
                .fold(f64::INFINITY, f64::min),
            GoalAtom::Following { person } | GoalAtom::Said { person, .. } => state
                .person_at
                .get(person)
                .map(|loc| d(&state.robot_at, loc))
                .unwrap_or(f64::INFINITY),
            GoalAtom::RobotInRoom(room) => ctx
                .locations
                .iter()
                .filter(|l| kb.location_room(l) == Some(room))
                .map(|l| d(&state.robot_at, l))
                .fold(f64::INFINITY, f64::min),
            // guide_requests is non-empty for these, so the heuristic is
            // already zeroed above
            GoalAtom::PersonAt { .. } => 0.0,
        };
        h = h.max(bound);
    }
    h
}

/// Successor generation: every applicable ground action with its cost.
fn successors(state: &State, ctx: &Ctx) -> Vec<(Action, f64, State)> {
    let mut out = Vec::new();
    let kb = ctx.kb;
    let here = state.robot_at.clone();

    // find: perceive a co-located, not-yet-verified entity — but only when
    // the look serves a Found goal or makes a believed object pickable
    for (id, loc) in state.object_at.iter().chain(state.person_at.iter()) {
        let useful = ctx.found_candidate(id) || !state.pickable.contains(id);
        if loc == &here && !state.verified.contains(id) && useful {
            let mut s = state.clone();
            s.verified.insert(id.clone());
            s.pickable.insert(id.clone());
            out.push((Action::Find { object: id.clone() }, 1.0, s));
        }
    }
    // follow: only when the goal asks for it
    for atom in ctx.goal {
        if let GoalAtom::Following { person } = atom {
            if state.person_at.get(person) == Some(&here)
                && state.following.as_deref() != Some(person)
            {
                let mut s = state.clone();
                s.following = Some(person.clone());
                out.push((Action::Follow { person: person.clone() }, 1.0, s));
            }
        }
    }
    // guide: only sanctioned escorts
    for (person, to) in &ctx.guide_requests {
        if state.person_at.get(person) == Some(&here) && to != &here {
            let mut s = state.clone();
            s.robot_at = to.clone();
            s.person_at.insert(person.clone(), to.clone());
            out.push((Action::Guide { person: person.clone(), to: to.clone() }, 1.0, s));
        }
    }
    // handover: pass the held object to a co-located delivery recipient
    if let Some(held) = &state.holding {
        for (person, loc) in &state.person_at {
            if loc == &here && ctx.delivery_targets.contains(person) {
                let mut s = state.clone();
                s.holding = None;
                s.delivered.insert(held.clone(), person.clone());
                out.push((
                    Action::Handover { object: held.clone(), person: person.clone() },
                    1.0,
                    s,
                ));
            }
        }
    }
    // navigate: anywhere else
    for to in &ctx.locations {
        if to != &here {
            let mut s = state.clone();
            s.robot_at = to.clone();
            out.push((Action::Navigate { to: to.clone() }, travel(kb, &here, to), s));
        }
    }
    // pick: a goal-relevant, pickable object believed to be right here
    if state.holding.is_none() {
        for (obj, loc) in &state.object_at {
            if loc == &here && state.pickable.contains(obj) && ctx.object_relevant(obj) {
                let mut s = state.clone();
                s.holding = Some(obj.clone());
                s.object_at.remove(obj);
                out.push((Action::Pick { object: obj.clone() }, 1.0, s));
            }
        }
    }
    // place: put the held object down here, if the surface allows it
    if let Some(held) = &state.holding {
        let placeable = kb
            .class_of(&here)
            .is_some_and(|c| kb.ontology().placement_capable(c));
        if placeable {
            let mut s = state.clone();
            s.holding = None;
            s.object_at.insert(held.clone(), here.clone());
            out.push((Action::Place { object: held.clone(), location: here.clone() }, 1.0, s));
        }
    }
    // say: deliver a goal phrase to a co-located person
    for atom in ctx.goal {
        if let GoalAtom::Said { person, phrase } = atom {
            let key = (person.clone(), phrase.clone());
            if state.person_at.get(person) == Some(&here) && !state.said.contains(&key) {
                let mut s = state.clone();
                s.said.insert(key);
                out.push((Action::Say { phrase: phrase.clone(), person: person.clone() }, 1.0, s));
            }
        }
    }
    out
}

/// Heap node ordered by (f, action sequence); `BinaryHeap` is a max-heap, so
/// `Ord` is reversed to pop the smallest first.
struct Node {
    f: f64,
    g: f64,
    actions: Vec<Action>,
    state: State,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.f.total_cmp(&other.f).is_eq() && self.actions == other.actions
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
        self.f
            .total_cmp(&other.f)
            .then_with(|| self.actions.cmp(&other.actions))
            .reverse()
    }
}

const MAX_EXPANSIONS: usize = 500_000;

fn astar(start: State, ctx: &Ctx) -> Option<(Vec<Action>, f64)> {
    let mut open = BinaryHeap::new();
    let h0 = heuristic(&start, ctx);
    if h0.is_infinite() {
        return None;
    }
    open.push(Node { f: h0, g: 0.0, actions: Vec::new(), state: start });
    let mut best_g: BTreeMap<State, f64> = BTreeMap::new();
    let mut expansions = 0usize;
    while let Some(node) = open.pop() {
        if node.state.satisfies(ctx.goal, ctx.kb) {
            return Some((node.actions, node.g));
        }
        if let Some(&g) = best_g.get(&node.state) {
            if node.g > g + 1e-9 {
                continue;
            }
        }
        expansions += 1;
        if expansions > MAX_EXPANSIONS {
            return None;
        }
        for (action, cost, next) in successors(&node.state, ctx) {
            let g = node.g + cost;
            match best_g.get(&next) {
                Some(&seen) if seen <= g + 1e-9 => continue,
                _ => {}
            }
            best_g.insert(next.clone(), g);
            let h = heuristic(&next, ctx);
            if h.is_infinite() {
                continue;
            }
            let mut actions = node.actions.clone();
            actions.push(action);
            open.push(Node { f: g + h, g, actions, state: next });
        }
    }
    None
}

fn make_ctx<'a>(kb: &'a KnowledgeBase, goal: &'a Goal) -> Ctx<'a> {
    let mut guide_requests = BTreeSet::new();
    let mut delivery_targets = BTreeSet::new();
    for atom in &goal.atoms {
        if let GoalAtom::Delivered { to, .. } = atom {
            delivery_targets.insert(to.clone());
        }
        if let GoalAtom::PersonAt { person, place } = atom {
            match place {
                PlaceTerm::Location(l) => {
                    guide_requests.insert((person.clone(), l.clone()));
                }
                PlaceTerm::Room(r) => {
                    for l in kb.all_locations() {
                        if kb.location_room(&l) == Some(r) {
                            guide_requests.insert((person.clone(), l.clone()));
                        }
                    }
                }
            }
        }
    }
    Ctx { kb, locations: kb.all_locations(), guide_requests, delivery_targets, goal: &goal.atoms }
}

/// Plan for `goal` from the current belief state.
///
/// With an open assumption in play, each open hypothesis is planned for as if
/// it were true and the cheapest resulting plan wins (ties go to the
/// injection order, which is itself cheapest-travel-first). The winning
/// plan's `hypothesis` names the guess it is betting on.
pub fn plan(kb: &KnowledgeBase, goal: &Goal) -> Result<Plan, PlanError> {
    let ctx = make_ctx(kb, goal);
    let base = State::from_kb(kb)?;
    let open = match &goal.assumption {
        Some(aid) => {
            let a = kb.assumption(aid).ok_or_else(|| KbError::UnknownAssumption(aid.clone()))?;
            match a.status {
                crate::kb::HypothesisStatus::Open => kb.open_hypotheses(aid),
                // confirmed or refuted: the object is either observed now or
                // gone; plan on the facts alone
                _ => Vec::new(),
            }
        }
        None => Vec::new(),
    };
    if open.is_empty() {
        let (actions, cost) = astar(base, &ctx).ok_or(PlanError::NoPlan)?;
        return Ok(Plan { actions, cost, hypothesis: None });
    }
    let mut best: Option<Plan> = None;
    for h in open {
        let mut state = base.clone();
        let loc = h.claim.object.as_entity().expect("claims place entities");
        // plan as if the guessed object really were there: visible to find,
        // but not pickable until found
        state.object_at.insert(h.claim.subject.clone(), loc.to_string());
        if let Some((actions, cost)) = astar(state, &ctx) {
            let better = match &best {
                None => true,
                Some(b) => cost + 1e-9 < b.cost,
            };
            if better {
                best = Some(Plan { actions, cost, hypothesis: Some(h.id.clone()) });
            }
        }
    }
    best.ok_or(PlanError::NoPlan)
}

/// Refute the hypothesis a failed `find` was betting on, then either hand
/// back the next-cheapest plan or, when nothing is left to try, a diagnosis
/// of the whole assumption.
pub fn replan_after_failure(
    kb: &mut KnowledgeBase,
    goal: &Goal,
    failed_hypothesis: &str,
) -> Result<Replan, PlanError> {
    kb.refute_hypothesis(failed_hypothesis)?;
    match plan(kb, goal) {
        Ok(p) => Ok(Replan::NewPlan(p)),
        Err(PlanError::NoPlan) => {
            let assumption = goal
                .assumption
                .clone()
                .or_else(|| kb.hypothesis(failed_hypothesis).map(|h| h.parent.clone()))
                .ok_or(PlanError::NoPlan)?;
            Ok(Replan::Diagnose(kb.diagnose(&assumption)?))
        }
        Err(e) => Err(e),
    }
}

/// Pick the shelf for an object being stored: the placement location already
/// holding the most similar objects (shared similarity group or class), ties
/// to the lexicographically first. With no similar object anywhere, the
/// first placement location wins.
pub fn storing_placement(class: &str, kb: &KnowledgeBase) -> Result<String, PlanError> {
    let locations = kb.all_placement_locations();
    if locations.is_empty() {
        return Err(PlanError::NoStorage);
    }
    let mut scored: Vec<(usize, &String)> = locations
        .iter()
        .map(|loc| {
            let n = kb
                .query(&Pattern::any().predicate(Relation::At), false)
                .iter()
                .filter(|t| t.object.as_entity() == Some(loc.as_str()))
                .filter(|t| {
                    kb.class_of(&t.subject).is_some_and(|c| {
                        c == class || kb.ontology().similar(c, class)
                    })
                })
                .count();
            (n, loc)
        })
        .collect();
    scored.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    Ok(scored[0].1.clone())
}
