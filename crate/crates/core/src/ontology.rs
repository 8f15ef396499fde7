//! Class hierarchy, relation declarations and similarity groups.
//!
//! The ontology is deliberately small: a single-parent is-a hierarchy (a DAG
//! in the general case, a tree here), one domain/range declaration per
//! relation, and named similarity groups used when deciding where groceries
//! should be stored.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Closed set of relations a triple may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    IsA,
    At,
    InRoom,
    HasAttribute,
    Holds,
    Near,
    AtPose,
    Labeled,
}

impl Relation {
    pub fn name(self) -> &'static str {
        match self {
            Relation::IsA => "is-a",
            Relation::At => "at",
            Relation::InRoom => "in-room",
            Relation::HasAttribute => "has-attribute",
            Relation::Holds => "holds",
            Relation::Near => "near",
            Relation::AtPose => "at-pose",
            Relation::Labeled => "labeled",
        }
    }
}

impl std::fmt::Display for Relation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// What the object position of a relation may hold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RangeKind {
    /// An entity whose class must descend from the named class.
    Class(String),
    /// A free-form literal (attribute values, poses, label text).
    Literal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationDecl {
    /// Required (ancestor) class of the subject.
    pub domain: String,
    pub range: RangeKind,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OntologyError {
    #[error("class `{0}` is already declared")]
    DuplicateClass(String),
    #[error("parent class `{0}` is not declared")]
    UnknownParent(String),
    #[error("declaring `{child}` under `{parent}` would create an is-a cycle")]
    Cycle { child: String, parent: String },
}

/// Class hierarchy plus relation and similarity-group declarations.
#[derive(Debug, Clone, PartialEq)]
pub struct Ontology {
    /// child class -> parent class; the root ("thing") has no entry.
    parent: BTreeMap<String, String>,
    relations: BTreeMap<Relation, RelationDecl>,
    /// group name -> member classes.
    groups: BTreeMap<String, BTreeSet<String>>,
}

pub const ROOT_CLASS: &str = "thing";

impl Ontology {
    /// An ontology containing only the root class and relation declarations.
    pub fn empty() -> Self {
        let mut relations = BTreeMap::new();
        let decl = |d: &str, r: RangeKind| RelationDecl { domain: d.to_string(), range: r };
        relations.insert(Relation::IsA, decl(ROOT_CLASS, RangeKind::Literal));
        relations.insert(Relation::At, decl("physical", RangeKind::Class("location".into())));
        relations.insert(Relation::InRoom, decl("location", RangeKind::Class("room".into())));
        relations.insert(Relation::HasAttribute, decl(ROOT_CLASS, RangeKind::Literal));
        relations.insert(Relation::Holds, decl("agent", RangeKind::Class("object".into())));
        relations.insert(Relation::Near, decl("physical", RangeKind::Class("physical".into())));
        relations.insert(Relation::AtPose, decl("landmark", RangeKind::Literal));
        relations.insert(Relation::Labeled, decl("landmark", RangeKind::Literal));
        Ontology { parent: BTreeMap::new(), relations, groups: BTreeMap::new() }
    }

    /// The stock ontology every bundled world builds on: rooms, placement
    /// furniture, waypoints, a handful of grocery classes with similarity
    /// groups, people and the robot itself.
    pub fn standard() -> Self {
        let mut o = Ontology::empty();
        let tree: &[(&str, &str)] = &[
            ("physical", ROOT_CLASS),
            ("location", "physical"),
            ("room", ROOT_CLASS),
            ("landmark", "physical"),
            ("placard", "landmark"),
            // Placement-capable furniture all descends from `placement`.
            ("placement", "location"),
            ("counter", "placement"),
            ("table", "placement"),
            ("cupboard", "placement"),
            ("shelf", "placement"),
            ("sofa", "placement"),
            ("bookshelf", "placement"),
            ("stand", "placement"),
            ("bed", "placement"),
            ("desk", "placement"),
            ("bar", "placement"),
            // Pure navigation targets carry no placement surface.
            ("waypoint", "location"),
            // Manipulable objects.
            ("object", "physical"),
            ("fruit", "object"),
            ("apple", "fruit"),
            ("orange", "fruit"),
            ("pear", "fruit"),
            ("banana", "fruit"),
            ("drink", "object"),
            ("juice", "drink"),
            ("milk", "drink"),
            ("snack", "object"),
            ("cereal", "snack"),
            ("crackers", "snack"),
            ("bag", "object"),
            // Agents.
            ("agent", "physical"),
            ("person", "agent"),
            ("robot", "agent"),
        ];
        for (child, parent) in tree {
            o.declare_class(child, parent).expect("standard ontology is well-formed");
        }
        for (group, members) in [
            ("fruit", vec!["apple", "orange", "pear", "banana"]),
            ("drinks", vec!["juice", "milk"]),
            ("snacks", vec!["cereal", "crackers"]),
        ] {
            o.declare_group(group, members.into_iter());
        }
        o
    }

    /// Add `child` under `parent`. The parent must already exist.
    pub fn declare_class(&mut self, child: &str, parent: &str) -> Result<(), OntologyError> {
        if child == ROOT_CLASS || self.parent.contains_key(child) {
            return Err(OntologyError::DuplicateClass(child.to_string()));
        }
        if parent != ROOT_CLASS && !self.parent.contains_key(parent) {
            return Err(OntologyError::UnknownParent(parent.to_string()));
        }
        // `parent` exists and existing links are acyclic, so a cycle can only
        // appear if `parent` descends from `child`; `child` is new, so it
        // cannot. The check stays for hand-built ontologies that edit links.
        if self.is_subclass(parent, child) {
            return Err(OntologyError::Cycle {
                child: child.to_string(),
                parent: parent.to_string(),
            });
        }
        self.parent.insert(child.to_string(), parent.to_string());
        Ok(())
    }

    pub fn declare_group<'a>(&mut self, name: &str, members: impl Iterator<Item = &'a str>) {
        self.groups
            .entry(name.to_string())
            .or_default()
            .extend(members.map(str::to_string));
    }

    pub fn has_class(&self, class: &str) -> bool {
        class == ROOT_CLASS || self.parent.contains_key(class)
    }

    /// `class` and every ancestor up to the root, nearest first.
    pub fn ancestors<'a>(&'a self, class: &'a str) -> Vec<&'a str> {
        let mut out = vec![class];
        let mut cur = class;
        while let Some(p) = self.parent.get(cur) {
            out.push(p.as_str());
            cur = p;
        }
        if class != ROOT_CLASS && out.last() != Some(&ROOT_CLASS) {
            out.push(ROOT_CLASS);
        }
        out.dedup();
        out
    }

    /// Reflexive, transitive is-a check.
    pub fn is_subclass(&self, class: &str, ancestor: &str) -> bool {
        ancestor == ROOT_CLASS && self.has_class(class)
            || self.ancestors(class).iter().any(|c| *c == ancestor)
    }

    /// Whether objects can be placed on/in locations of this class.
    pub fn placement_capable(&self, class: &str) -> bool {
        self.is_subclass(class, "placement")
    }

    pub fn relation_decl(&self, rel: Relation) -> &RelationDecl {
        &self.relations[&rel]
    }

    /// Name of the similarity group `class` belongs to, if any.
    pub fn group_of(&self, class: &str) -> Option<&str> {
        self.groups
            .iter()
            .find(|(_, members)| members.contains(class))
            .map(|(name, _)| name.as_str())
    }

    /// Two classes are similar when they share a similarity group.
    pub fn similar(&self, a: &str, b: &str) -> bool {
        match (self.group_of(a), self.group_of(b)) {
            (Some(ga), Some(gb)) => ga == gb,
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_hierarchy_answers_is_a() {
        let o = Ontology::standard();
        assert!(o.is_subclass("apple", "fruit"));
        assert!(o.is_subclass("apple", "object"));
        assert!(o.is_subclass("apple", ROOT_CLASS));
        assert!(o.is_subclass("apple", "apple"));
        assert!(!o.is_subclass("fruit", "apple"));
        assert!(!o.is_subclass("apple", "drink"));
    }

    #[test]
    fn placement_capability_follows_the_placement_subtree() {
        let o = Ontology::standard();
        for c in ["counter", "table", "cupboard", "shelf", "bed"] {
            assert!(o.placement_capable(c), "{c} should accept placements");
        }
        assert!(!o.placement_capable("waypoint"));
        assert!(!o.placement_capable("apple"));
    }

    #[test]
    fn similarity_groups() {
        let o = Ontology::standard();
        assert!(o.similar("apple", "pear"));
        assert!(o.similar("juice", "milk"));
        assert!(!o.similar("apple", "juice"));
        assert!(!o.similar("bag", "bag")); // ungrouped classes are similar to nothing
    }

    #[test]
    fn cycles_and_duplicates_are_rejected() {
        let mut o = Ontology::empty();
        o.declare_class("a", ROOT_CLASS).unwrap();
        o.declare_class("b", "a").unwrap();
        assert_eq!(o.declare_class("b", "a"), Err(OntologyError::DuplicateClass("b".into())));
        assert_eq!(o.declare_class("c", "nope"), Err(OntologyError::UnknownParent("nope".into())));
    }

    #[test]
    fn relation_serde_uses_kebab_names() {
        let j = serde_json::to_string(&Relation::InRoom).unwrap();
        assert_eq!(j, "\"in-room\"");
        let r: Relation = serde_json::from_str("\"at-pose\"").unwrap();
        assert_eq!(r, Relation::AtPose);
    }
}
