//! Open-world knowledge base: a typed triple store over a small ontology,
//! plus the hypothesis machinery that lets the planner act on objects nobody
//! has seen yet.
//!
//! When a command refers to an object with no known instance, the KB injects
//! one *assumption* ("there is an apple in the kitchen") with one open
//! *hypothesis* per placement location in scope. Failed searches refute
//! hypotheses one by one; a successful find confirms one. Once every child is
//! refuted the assumption itself is refuted and [`KnowledgeBase::diagnose`]
//! can explain why the task was impossible.

use crate::grammar::ObjectDescriptor;
use crate::ontology::{Ontology, RangeKind, Relation};
use crate::sim::DistanceTable;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Fixed id of the robot's own entity.
pub const ROBOT: &str = "robot";
/// Fixed id of the person giving commands.
pub const OPERATOR: &str = "operator";

/// How an entity entered the KB.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    /// Sensed directly (or part of the surveyed map).
    Observed,
    /// Stated by the operator or the world description, not yet sensed.
    Asserted,
    /// Invented to stand in for an object that may not exist.
    Hypothetical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub class: String,
    pub origin: Origin,
}

/// Object position of a triple: another entity or a literal value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripleObject {
    Entity(String),
    Literal(String),
}

impl TripleObject {
    pub fn entity(id: &str) -> Self {
        TripleObject::Entity(id.to_string())
    }
    pub fn literal(s: &str) -> Self {
        TripleObject::Literal(s.to_string())
    }
    pub fn as_entity(&self) -> Option<&str> {
        match self {
            TripleObject::Entity(id) => Some(id),
            TripleObject::Literal(_) => None,
        }
    }
}

impl std::fmt::Display for TripleObject {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TripleObject::Entity(id) => f.write_str(id),
            TripleObject::Literal(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub predicate: Relation,
    pub object: TripleObject,
}

impl Triple {
    pub fn new(subject: &str, predicate: Relation, object: TripleObject) -> Self {
        Triple { subject: subject.to_string(), predicate, object }
    }

    /// `subject at location` shorthand; most KB traffic is placement facts.
    pub fn at(subject: &str, location: &str) -> Self {
        Triple::new(subject, Relation::At, TripleObject::entity(location))
    }
}

impl std::fmt::Display for Triple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {} {}", self.subject, self.predicate, self.object)
    }
}

/// Wildcard-capable triple pattern for [`KnowledgeBase::query`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Pattern {
    pub subject: Option<String>,
    pub predicate: Option<Relation>,
    pub object: Option<TripleObject>,
}

impl Pattern {
    pub fn any() -> Self {
        Pattern::default()
    }
    pub fn subject(mut self, s: &str) -> Self {
        self.subject = Some(s.to_string());
        self
    }
    pub fn predicate(mut self, p: Relation) -> Self {
        self.predicate = Some(p);
        self
    }
    pub fn object(mut self, o: TripleObject) -> Self {
        self.object = Some(o);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisStatus {
    Open,
    Refuted,
    Confirmed,
}

/// One guessed placement of a not-yet-observed object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub id: String,
    /// The guessed fact, e.g. `apple-h-counter at counter`.
    pub claim: Triple,
    /// Id of the assumption this hypothesis belongs to.
    pub parent: String,
    pub status: HypothesisStatus,
}

/// A family of hypotheses standing for one existential guess.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assumption {
    pub id: String,
    /// Object class the assumption is about.
    pub class: String,
    /// Room scope, or `None` when the object could be anywhere.
    pub scope: Option<String>,
    /// Human-readable rendering, e.g. "apple in kitchen".
    pub text: String,
    /// Child hypothesis ids in injection (cheapest-first) order.
    pub children: Vec<String>,
    pub status: HypothesisStatus,
}

/// Result of [`KnowledgeBase::diagnose`]; serialises to the report format the
/// CLI prints when a task turns out to be impossible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisReport {
    pub assumption: String,
    pub children: Vec<DiagnosisChild>,
    pub conclusion: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisChild {
    pub claim: String,
    pub status: HypothesisStatus,
}

#[derive(Debug, Error, PartialEq)]
pub enum KbError {
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("entity `{0}` already exists with a different class or origin")]
    EntityExists(String),
    #[error("relation type error on `{triple}`: {reason}")]
    RelationTypeError { triple: String, reason: String },
    #[error("hypothesis `{0}` is not open")]
    HypothesisNotOpen(String),
    #[error("unknown hypothesis `{0}`")]
    UnknownHypothesis(String),
    #[error("unknown assumption `{0}`")]
    UnknownAssumption(String),
    #[error("no placement locations in scope `{0}`")]
    NoPlacementLocations(String),
}

/// The store itself. Single writer through `&mut`; clone it for a consistent
/// read-only snapshot.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    ontology: Ontology,
    entities: BTreeMap<String, Entity>,
    facts: BTreeSet<Triple>,
    hypotheses: BTreeMap<String, Hypothesis>,
    assumptions: BTreeMap<String, Assumption>,
    /// hypothetical id -> observed id, written on confirmation.
    aliases: BTreeMap<String, String>,
    travel: Option<DistanceTable>,
}

impl KnowledgeBase {
    pub fn new(ontology: Ontology) -> Self {
        KnowledgeBase {
            ontology,
            entities: BTreeMap::new(),
            facts: BTreeSet::new(),
            hypotheses: BTreeMap::new(),
            assumptions: BTreeMap::new(),
            aliases: BTreeMap::new(),
            travel: None,
        }
    }

    pub fn ontology(&self) -> &Ontology {
        &self.ontology
    }

    /// Attach the world's travel-cost table; used to order hypotheses.
    pub fn set_travel(&mut self, table: DistanceTable) {
        self.travel = Some(table);
    }

    pub fn travel(&self) -> Option<&DistanceTable> {
        self.travel.as_ref()
    }

    pub fn add_entity(&mut self, id: &str, class: &str, origin: Origin) -> Result<(), KbError> {
        if !self.ontology.has_class(class) {
            return Err(KbError::UnknownClass(class.to_string()));
        }
        match self.entities.get(id) {
            Some(e) if e.class == class && e.origin == origin => Ok(()), // idempotent
            Some(_) => Err(KbError::EntityExists(id.to_string())),
            None => {
                self.entities.insert(
                    id.to_string(),
                    Entity { id: id.to_string(), class: class.to_string(), origin },
                );
                Ok(())
            }
        }
    }

    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.get(id)
    }

    /// Follow the confirmation alias of a hypothetical id, if any.
    pub fn resolve<'a>(&'a self, id: &'a str) -> &'a str {
        self.aliases.get(id).map(String::as_str).unwrap_or(id)
    }

    pub fn class_of(&self, id: &str) -> Option<&str> {
        self.entities.get(self.resolve(id)).map(|e| e.class.as_str())
    }

    pub fn entities_of_class(&self, class: &str, include_hypothetical: bool) -> Vec<&Entity> {
        self.entities
            .values()
            .filter(|e| include_hypothetical || e.origin != Origin::Hypothetical)
            .filter(|e| self.ontology.is_subclass(&e.class, class))
            .collect()
    }

    /// Where the robot currently believes itself to be.
    pub fn robot_location(&self) -> Option<&str> {
        self.facts
            .iter()
            .find(|t| t.subject == ROBOT && t.predicate == Relation::At)
            .and_then(|t| t.object.as_entity())
    }

    pub fn location_room(&self, location: &str) -> Option<&str> {
        self.facts
            .iter()
            .find(|t| t.subject == location && t.predicate == Relation::InRoom)
            .and_then(|t| t.object.as_entity())
    }

    /// Placement-capable locations linked to `room`, sorted by id.
    pub fn placement_locations_in(&self, room: &str) -> Vec<String> {
        self.facts
            .iter()
            .filter(|t| {
                t.predicate == Relation::InRoom && t.object.as_entity() == Some(room)
            })
            .filter(|t| {
                self.class_of(&t.subject)
                    .is_some_and(|c| self.ontology.placement_capable(c))
            })
            .map(|t| t.subject.clone())
            .collect()
    }

    pub fn all_placement_locations(&self) -> Vec<String> {
        self.entities
            .values()
            .filter(|e| self.ontology.placement_capable(&e.class))
            .map(|e| e.id.clone())
            .collect()
    }

    /// Every navigable location (placements and bare waypoints), sorted by id.
    pub fn all_locations(&self) -> Vec<String> {
        self.entities
            .values()
            .filter(|e| self.ontology.is_subclass(&e.class, "location"))
            .map(|e| e.id.clone())
            .collect()
    }

    pub fn rooms(&self) -> Vec<String> {
        self.entities
            .values()
            .filter(|e| e.class == "room")
            .map(|e| e.id.clone())
            .collect()
    }

    pub fn people(&self) -> Vec<String> {
        self.entities
            .values()
            .filter(|e| e.class == "person")
            .map(|e| e.id.clone())
            .collect()
    }

    fn check_types(&self, t: &Triple) -> Result<(), KbError> {
        let type_err = |reason: String| KbError::RelationTypeError {
            triple: t.to_string(),
            reason,
        };
        if t.predicate == Relation::IsA {
            return Err(type_err("is-a facts are derived from entity classes".into()));
        }
        let subject = self
            .entities
            .get(&t.subject)
            .ok_or_else(|| KbError::UnknownEntity(t.subject.clone()))?;
        let decl = self.ontology.relation_decl(t.predicate);
        if !self.ontology.is_subclass(&subject.class, &decl.domain) {
            return Err(type_err(format!(
                "subject class `{}` is not a `{}`",
                subject.class, decl.domain
            )));
        }
        match (&decl.range, &t.object) {
            (RangeKind::Literal, TripleObject::Literal(_)) => Ok(()),
            (RangeKind::Literal, TripleObject::Entity(_)) => {
                Err(type_err(format!("`{}` takes a literal object", t.predicate)))
            }
            (RangeKind::Class(c), TripleObject::Entity(id)) => {
                let obj = self
                    .entities
                    .get(id)
                    .ok_or_else(|| KbError::UnknownEntity(id.clone()))?;
                if self.ontology.is_subclass(&obj.class, c) {
                    Ok(())
                } else {
                    Err(type_err(format!("object class `{}` is not a `{}`", obj.class, c)))
                }
            }
            (RangeKind::Class(_), TripleObject::Literal(_)) => {
                Err(type_err(format!("`{}` takes an entity object", t.predicate)))
            }
        }
    }

    /// Insert a ground fact. `at` is functional: a new placement replaces the
    /// old one. Asserting a fact that matches an open hypothesis confirms it.
    pub fn assert_fact(&mut self, t: Triple) -> Result<(), KbError> {
        self.check_types(&t)?;
        if t.predicate == Relation::At {
            let old: Vec<Triple> = self
                .facts
                .iter()
                .filter(|f| f.subject == t.subject && f.predicate == Relation::At)
                .cloned()
                .collect();
            for f in old {
                self.facts.remove(&f);
            }
        }
        self.facts.insert(t.clone());
        if t.predicate == Relation::At {
            self.confirm_matching(&t);
        }
        Ok(())
    }

    pub fn retract_fact(&mut self, t: &Triple) -> bool {
        self.facts.remove(t)
    }

    /// Confirm every open hypothesis whose claim is satisfied by the newly
    /// asserted placement fact.
    fn confirm_matching(&mut self, t: &Triple) {
        let loc = match t.object.as_entity() {
            Some(l) => l.to_string(),
            None => return,
        };
        let subj_class = match self.class_of(&t.subject) {
            Some(c) => c.to_string(),
            None => return,
        };
        let subj_hypothetical =
            self.entities.get(&t.subject).is_some_and(|e| e.origin == Origin::Hypothetical);
        let matching: Vec<String> = self
            .hypotheses
            .values()
            .filter(|h| h.status == HypothesisStatus::Open)
            .filter(|h| h.claim.object.as_entity() == Some(loc.as_str()))
            .filter(|h| {
                if h.claim.subject == t.subject {
                    // Observing the hypothetical entity itself.
                    return true;
                }
                if subj_hypothetical {
                    // One guess never confirms another.
                    return false;
                }
                self.class_of(&h.claim.subject)
                    .is_some_and(|hc| self.ontology.is_subclass(&subj_class, hc))
            })
            .map(|h| h.id.clone())
            .collect();
        for id in matching {
            let (claim_subject, parent) = {
                let h = self.hypotheses.get_mut(&id).expect("id from scan");
                h.status = HypothesisStatus::Confirmed;
                (h.claim.subject.clone(), h.parent.clone())
            };
            if claim_subject == t.subject {
                // Promote the guessed entity in place.
                if let Some(e) = self.entities.get_mut(&claim_subject) {
                    e.origin = Origin::Observed;
                }
            } else {
                self.aliases.insert(claim_subject, t.subject.clone());
            }
            if let Some(a) = self.assumptions.get_mut(&parent) {
                a.status = HypothesisStatus::Confirmed;
            }
        }
    }

    /// Match `pattern` against ground facts (plus open-hypothesis claims when
    /// `include_hypothetical`). `is-a` queries are answered from entity
    /// classes and the ontology rather than stored triples. Results are
    /// sorted lexicographically.
    pub fn query(&self, pattern: &Pattern, include_hypothetical: bool) -> Vec<Triple> {
        let mut out: Vec<Triple> = Vec::new();
        if pattern.predicate == Some(Relation::IsA) {
            for e in self.entities.values() {
                if let Some(s) = &pattern.subject {
                    if s != &e.id {
                        continue;
                    }
                }
                for class in self.ontology.ancestors(&e.class) {
                    let t = Triple::new(&e.id, Relation::IsA, TripleObject::literal(class));
                    if let Some(o) = &pattern.object {
                        if *o != t.object {
                            continue;
                        }
                    }
                    out.push(t);
                }
            }
        } else {
            let claims = self
                .hypotheses
                .values()
                .filter(|h| h.status == HypothesisStatus::Open)
                .map(|h| h.claim.clone());
            let candidates: Vec<Triple> = if include_hypothetical {
                self.facts.iter().cloned().chain(claims).collect()
            } else {
                self.facts.iter().cloned().collect()
            };
            for t in candidates {
                if let Some(s) = &pattern.subject {
                    if s != &t.subject {
                        continue;
                    }
                }
                if let Some(p) = pattern.predicate {
                    if p != t.predicate {
                        continue;
                    }
                }
                if let Some(o) = &pattern.object {
                    if o != &t.object {
                        continue;
                    }
                }
                out.push(t);
            }
        }
        if !include_hypothetical {
            out.retain(|t| {
                let subj_ok = self
                    .entities
                    .get(&t.subject)
                    .is_none_or(|e| e.origin != Origin::Hypothetical);
                let obj_ok = match t.object.as_entity() {
                    Some(id) => self
                        .entities
                        .get(id)
                        .is_none_or(|e| e.origin != Origin::Hypothetical),
                    None => true,
                };
                subj_ok && obj_ok
            });
        }
        out.sort();
        out.dedup();
        out
    }

    fn travel_cost_from_robot(&self, to: &str) -> f64 {
        match (self.robot_location(), &self.travel) {
            (Some(from), Some(table)) => table.get(from, to).unwrap_or(0.0),
            _ => 0.0,
        }
    }

    /// Guess placements for an object with no known instance.
    ///
    /// One hypothetical entity and one open hypothesis per placement location
    /// in scope (a room id, or every room when `scope` is `None`), all under
    /// a single assumption. Locations are ordered by travel cost from the
    /// robot's current location, ties by id. Re-injecting an existing
    /// assumption returns its still-open hypotheses without duplicating
    /// anything.
    pub fn inject_hypotheses(
        &mut self,
        descriptor: &ObjectDescriptor,
        scope: Option<&str>,
    ) -> Result<Vec<Hypothesis>, KbError> {
        let class = descriptor.class.as_str();
        if !self.ontology.has_class(class) {
            return Err(KbError::UnknownClass(class.to_string()));
        }
        let (assumption_id, text, locations) = match scope {
            Some(room) => {
                match self.entities.get(room) {
                    Some(e) if e.class == "room" => {}
                    _ => return Err(KbError::UnknownEntity(room.to_string())),
                }
                let locs = self.placement_locations_in(room);
                (
                    format!("{class}-in-{room}"),
                    format!("{class} in {room}"),
                    locs,
                )
            }
            None => (
                format!("{class}-anywhere"),
                format!("{class} anywhere"),
                self.all_placement_locations(),
            ),
        };
        if let Some(a) = self.assumptions.get(&assumption_id) {
            let open: Vec<Hypothesis> = a
                .children
                .iter()
                .filter_map(|id| self.hypotheses.get(id))
                .filter(|h| h.status == HypothesisStatus::Open)
                .cloned()
                .collect();
            return Ok(open);
        }
        if locations.is_empty() {
            return Err(KbError::NoPlacementLocations(
                scope.unwrap_or("anywhere").to_string(),
            ));
        }
        let mut ordered: Vec<(f64, String)> = locations
            .into_iter()
            .map(|l| (self.travel_cost_from_robot(&l), l))
            .collect();
        ordered.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));

        let mut children = Vec::new();
        let mut out = Vec::new();
        for (_, loc) in ordered {
            let ent_id = format!("{class}-h-{loc}");
            self.add_entity(&ent_id, class, Origin::Hypothetical)?;
            let hyp_id = format!("{assumption_id}:{loc}");
            let hyp = Hypothesis {
                id: hyp_id.clone(),
                claim: Triple::at(&ent_id, &loc),
                parent: assumption_id.clone(),
                status: HypothesisStatus::Open,
            };
            self.hypotheses.insert(hyp_id.clone(), hyp.clone());
            children.push(hyp_id);
            out.push(hyp);
        }
        self.assumptions.insert(
            assumption_id.clone(),
            Assumption {
                id: assumption_id,
                class: class.to_string(),
                scope: scope.map(str::to_string),
                text,
                children,
                status: HypothesisStatus::Open,
            },
        );
        Ok(out)
    }

    pub fn hypothesis(&self, id: &str) -> Option<&Hypothesis> {
        self.hypotheses.get(id)
    }

    pub fn assumption(&self, id: &str) -> Option<&Assumption> {
        self.assumptions.get(id)
    }

    /// Still-open children of `assumption`, in injection order.
    pub fn open_hypotheses(&self, assumption: &str) -> Vec<&Hypothesis> {
        self.assumptions
            .get(assumption)
            .map(|a| {
                a.children
                    .iter()
                    .filter_map(|id| self.hypotheses.get(id))
                    .filter(|h| h.status == HypothesisStatus::Open)
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Mark one guess wrong. When the last open sibling goes, the parent
    /// assumption is refuted with it.
    pub fn refute_hypothesis(&mut self, id: &str) -> Result<(), KbError> {
        let parent = {
            let h = self
                .hypotheses
                .get_mut(id)
                .ok_or_else(|| KbError::UnknownHypothesis(id.to_string()))?;
            if h.status != HypothesisStatus::Open {
                return Err(KbError::HypothesisNotOpen(id.to_string()));
            }
            h.status = HypothesisStatus::Refuted;
            h.parent.clone()
        };
        let all_refuted = self.assumptions[&parent]
            .children
            .iter()
            .all(|c| self.hypotheses[c].status == HypothesisStatus::Refuted);
        if all_refuted {
            self.assumptions.get_mut(&parent).expect("parent exists").status =
                HypothesisStatus::Refuted;
        }
        Ok(())
    }

    /// Explain the state of an assumption after (partial) search.
    pub fn diagnose(&self, assumption: &str) -> Result<DiagnosisReport, KbError> {
        let a = self
            .assumptions
            .get(assumption)
            .ok_or_else(|| KbError::UnknownAssumption(assumption.to_string()))?;
        let children: Vec<&Hypothesis> =
            a.children.iter().map(|id| &self.hypotheses[id]).collect();
        let confirmed = children
            .iter()
            .find(|h| h.status == HypothesisStatus::Confirmed);
        let open = children
            .iter()
            .filter(|h| h.status == HypothesisStatus::Open)
            .count();
        let conclusion = if let Some(h) = confirmed {
            let loc = h.claim.object.as_entity().unwrap_or("?");
            format!("confirmed at {loc}")
        } else if open == 0 {
            "invalid".to_string()
        } else {
            format!(
                "undetermined, {open} {} unsearched",
                if open == 1 { "location" } else { "locations" }
            )
        };
        Ok(DiagnosisReport {
            assumption: a.text.clone(),
            children: children
                .iter()
                .map(|h| DiagnosisChild { claim: h.claim.to_string(), status: h.status })
                .collect(),
            conclusion,
        })
    }

    /// Sorted dump of ground facts, for the REPL's `:kb` command.
    pub fn dump(&self) -> Vec<String> {
        self.facts.iter().map(|t| t.to_string()).collect()
    }

    pub fn facts(&self) -> impl Iterator<Item = &Triple> {
        self.facts.iter()
    }
}
