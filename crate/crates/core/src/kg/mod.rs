//! Typed knowledge graph with dense entity/relation dictionaries.
//!
//! Edges are stored per relation as insertion-ordered sets of
//! `(subject, object)` id pairs. A label-dropped view of the graph is
//! well defined only while no ordered pair is shared by two relations;
//! in strict mode such an insertion is refused, in lenient mode it is
//! recorded and can be audited with [`KnowledgeGraph::verify_flattening_safety`].

mod flatten;
mod io;

pub use flatten::{collapse_anonymous_instances, AnonymousMatcher, FlattenConfig, RDF_TYPE};
pub use io::{read_snapshot, write_snapshot, write_tsv_dump, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KgError {
    #[error("invalid IRI {value:?}: {reason}")]
    InvalidIri { value: String, reason: &'static str },
    #[error("ambiguous pair ({subject}, {object}) already asserted under {existing}, refusing {new}")]
    AmbiguousPair {
        subject: String,
        object: String,
        existing: String,
        new: String,
    },
    #[error("anonymous node {iri} has {type_edges} type edges, expected exactly one")]
    DanglingAnonymous { iri: String, type_edges: usize },
    #[error("relations {relation} and {other} share domain/range ({domain}, {range})")]
    SchemaOverlap {
        relation: String,
        other: String,
        domain: String,
        range: String,
    },
    #[error("entity {entity} typed {existing}, conflicting type {new}")]
    TypeConflict {
        entity: String,
        existing: String,
        new: String,
    },
    #[error("unknown relation {0}")]
    UnknownRelation(String),
    #[error("malformed snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl KgError {
    /// Stable module-prefixed error code.
    pub fn code(&self) -> &'static str {
        match self {
            KgError::InvalidIri { .. } => "kg/invalid-iri",
            KgError::AmbiguousPair { .. } => "kg/ambiguous-pair",
            KgError::DanglingAnonymous { .. } => "kg/dangling-anonymous",
            KgError::SchemaOverlap { .. } => "kg/schema-overlap",
            KgError::TypeConflict { .. } => "kg/type-conflict",
            KgError::UnknownRelation(_) => "kg/unknown-relation",
            KgError::Snapshot(_) => "kg/snapshot",
            KgError::Io(_) => "kg/io",
        }
    }
}

/// An absolute IRI, stored expanded and without angle brackets.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Iri(String);

impl Iri {
    pub fn new(value: impl Into<String>) -> Result<Self, KgError> {
        let value = value.into();
        if value.is_empty() {
            return Err(KgError::InvalidIri {
                value,
                reason: "empty",
            });
        }
        if value.chars().any(char::is_whitespace) {
            return Err(KgError::InvalidIri {
                value,
                reason: "contains whitespace",
            });
        }
        Ok(Iri(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Iri {
    type Error = KgError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Iri::new(value)
    }
}

impl From<Iri> for String {
    fn from(iri: Iri) -> String {
        iri.0
    }
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Triple {
    pub subject: Iri,
    pub predicate: Iri,
    pub object: Iri,
}

impl Triple {
    pub fn new(subject: Iri, predicate: Iri, object: Iri) -> Self {
        Triple {
            subject,
            predicate,
            object,
        }
    }

    /// Builds a triple from raw strings, validating each IRI.
    pub fn parse(subject: &str, predicate: &str, object: &str) -> Result<Self, KgError> {
        Ok(Triple::new(
            Iri::new(subject)?,
            Iri::new(predicate)?,
            Iri::new(object)?,
        ))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct EntityId(pub u32);

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct RelationId(pub u32);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Ordered `(subject, object)` entity pair.
pub type Pair = (EntityId, EntityId);

/// Bijection between IRIs and dense ids, assigned in first-seen order.
#[derive(Clone, Default, Debug, PartialEq)]
pub struct Dictionary {
    names: Vec<Iri>,
    index: HashMap<String, u32>,
}

impl Dictionary {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn get(&self, iri: &str) -> Option<u32> {
        self.index.get(iri).copied()
    }

    pub fn name(&self, id: u32) -> &Iri {
        &self.names[id as usize]
    }

    pub fn names(&self) -> &[Iri] {
        &self.names
    }

    fn intern(&mut self, iri: &Iri) -> u32 {
        if let Some(&id) = self.index.get(iri.as_str()) {
            return id;
        }
        let id = u32::try_from(self.names.len()).expect("dictionary exceeds u32 ids");
        self.names.push(iri.clone());
        self.index.insert(iri.as_str().to_owned(), id);
        id
    }
}

/// Declared type signature of a relation.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct RelationSchema {
    pub relation: RelationId,
    pub domain_type: String,
    pub range_type: String,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Insertion {
    Inserted,
    Duplicate,
}

/// How an ordered pair asserted under a second relation is treated.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmbiguityMode {
    #[default]
    Strict,
    Lenient,
}

/// An ordered pair that occurs under more than one relation.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Ambiguity {
    pub subject: EntityId,
    pub object: EntityId,
    pub relations: Vec<RelationId>,
}

#[derive(Clone, Debug, Default)]
pub struct KnowledgeGraph {
    entities: Dictionary,
    relations: Dictionary,
    edges: Vec<IndexSet<Pair>>,
    pair_owner: HashMap<Pair, RelationId>,
    entity_types: BTreeMap<EntityId, String>,
    schemas: Vec<RelationSchema>,
    mode: AmbiguityMode,
}

impl PartialEq for KnowledgeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.entities == other.entities
            && self.relations == other.relations
            && self.edges == other.edges
            && self.entity_types == other.entity_types
            && self.schemas == other.schemas
    }
}

impl KnowledgeGraph {
    pub fn new(mode: AmbiguityMode) -> Self {
        KnowledgeGraph {
            mode,
            ..Default::default()
        }
    }

    pub fn mode(&self) -> AmbiguityMode {
        self.mode
    }

    pub fn entities(&self) -> &Dictionary {
        &self.entities
    }

    pub fn relations(&self) -> &Dictionary {
        &self.relations
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn entity_id(&self, iri: &str) -> Option<EntityId> {
        self.entities.get(iri).map(EntityId)
    }

    pub fn relation_id(&self, iri: &str) -> Option<RelationId> {
        self.relations.get(iri).map(RelationId)
    }

    pub fn entity_iri(&self, id: EntityId) -> &Iri {
        self.entities.name(id.0)
    }

    pub fn relation_iri(&self, id: RelationId) -> &Iri {
        self.relations.name(id.0)
    }

    pub fn relation_ids(&self) -> impl Iterator<Item = RelationId> {
        (0..self.relations.len() as u32).map(RelationId)
    }

    pub fn edges(&self, relation: RelationId) -> &IndexSet<Pair> {
        &self.edges[relation.index()]
    }

    /// Total number of edges over all relations.
    pub fn num_edges(&self) -> usize {
        self.edges.iter().map(IndexSet::len).sum()
    }

    /// True if the ordered pair is an edge of any relation.
    pub fn has_pair(&self, pair: Pair) -> bool {
        self.pair_owner.contains_key(&pair)
    }

    pub fn has_edge(&self, relation: RelationId, pair: Pair) -> bool {
        self.edges[relation.index()].contains(&pair)
    }

    /// Every distinct ordered pair of the graph, each once, in unspecified order.
    pub fn pairs(&self) -> impl Iterator<Item = Pair> + '_ {
        self.pair_owner.keys().copied()
    }

    /// The label-dropped edge set.
    pub fn flattened_pairs(&self) -> HashSet<Pair> {
        self.pair_owner.keys().copied().collect()
    }

    /// All edges as triples, relation by relation in id order.
    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.relation_ids().flat_map(move |r| {
            self.edges(r).iter().map(move |&(s, o)| {
                Triple::new(
                    self.entity_iri(s).clone(),
                    self.relation_iri(r).clone(),
                    self.entity_iri(o).clone(),
                )
            })
        })
    }

    pub fn add_triple(&mut self, t: &Triple) -> Result<Insertion, KgError> {
        if self.mode == AmbiguityMode::Strict {
            if let (Some(s), Some(o)) = (self.entity_id(t.subject.as_str()), self.entity_id(t.object.as_str())) {
                if let Some(&owner) = self.pair_owner.get(&(s, o)) {
                    if self.relation_iri(owner) != &t.predicate {
                        return Err(KgError::AmbiguousPair {
                            subject: t.subject.to_string(),
                            object: t.object.to_string(),
                            existing: self.relation_iri(owner).to_string(),
                            new: t.predicate.to_string(),
                        });
                    }
                }
            }
        }
        let s = EntityId(self.entities.intern(&t.subject));
        let o = EntityId(self.entities.intern(&t.object));
        let r = self.register_relation(&t.predicate);
        Ok(self.insert_ids(r, (s, o)))
    }

    /// Registers a relation without edges.
    pub fn register_relation(&mut self, iri: &Iri) -> RelationId {
        let r = RelationId(self.relations.intern(iri));
        if self.edges.len() <= r.index() {
            self.edges.resize_with(r.index() + 1, IndexSet::new);
        }
        r
    }

    pub fn register_entity(&mut self, iri: &Iri) -> EntityId {
        EntityId(self.entities.intern(iri))
    }

    /// Inserts an edge between already registered ids. The caller enforces
    /// the ambiguity policy.
    pub(crate) fn insert_ids(&mut self, relation: RelationId, pair: Pair) -> Insertion {
        if self.edges[relation.index()].insert(pair) {
            self.pair_owner.entry(pair).or_insert(relation);
            Insertion::Inserted
        } else {
            Insertion::Duplicate
        }
    }

    /// Edge count per relation name. Relations without edges are omitted.
    pub fn relation_stats(&self) -> BTreeMap<String, usize> {
        self.relation_ids()
            .filter(|&r| !self.edges(r).is_empty())
            .map(|r| (self.relation_iri(r).to_string(), self.edges(r).len()))
            .collect()
    }

    /// Every ordered pair that occurs under two or more relations, sorted by pair.
    pub fn verify_flattening_safety(&self) -> Vec<Ambiguity> {
        let mut seen: HashMap<Pair, Vec<RelationId>> = HashMap::new();
        for r in self.relation_ids() {
            for &pair in self.edges(r) {
                seen.entry(pair).or_default().push(r);
            }
        }
        let mut out: Vec<Ambiguity> = seen
            .into_iter()
            .filter(|(_, rels)| rels.len() > 1)
            .map(|((subject, object), relations)| Ambiguity {
                subject,
                object,
                relations,
            })
            .collect();
        out.sort_by_key(|a| (a.subject, a.object));
        out
    }

    pub fn schemas(&self) -> &[RelationSchema] {
        &self.schemas
    }

    pub fn schema(&self, relation: RelationId) -> Option<&RelationSchema> {
        self.schemas.iter().find(|s| s.relation == relation)
    }

    /// Declares the domain and range types of a relation. Two relations may
    /// not share the same `(domain, range)` pair.
    pub fn declare_schema(
        &mut self,
        relation: &Iri,
        domain_type: &str,
        range_type: &str,
    ) -> Result<RelationId, KgError> {
        let r = self.register_relation(relation);
        if let Some(other) = self.schemas.iter().find(|s| {
            s.relation != r && s.domain_type == domain_type && s.range_type == range_type
        }) {
            return Err(KgError::SchemaOverlap {
                relation: relation.to_string(),
                other: self.relation_iri(other.relation).to_string(),
                domain: domain_type.to_owned(),
                range: range_type.to_owned(),
            });
        }
        let schema = RelationSchema {
            relation: r,
            domain_type: domain_type.to_owned(),
            range_type: range_type.to_owned(),
        };
        match self.schemas.iter_mut().find(|s| s.relation == r) {
            Some(existing) => *existing = schema,
            None => self.schemas.push(schema),
        }
        Ok(r)
    }

    pub fn entity_type(&self, entity: EntityId) -> Option<&str> {
        self.entity_types.get(&entity).map(String::as_str)
    }

    pub fn entity_types(&self) -> &BTreeMap<EntityId, String> {
        &self.entity_types
    }

    pub fn set_entity_type(&mut self, iri: &Iri, label: &str) -> Result<EntityId, KgError> {
        let e = self.register_entity(iri);
        self.assign_type(e, label)?;
        Ok(e)
    }

    fn assign_type(&mut self, entity: EntityId, label: &str) -> Result<(), KgError> {
        match self.entity_types.get(&entity) {
            Some(existing) if existing != label => Err(KgError::TypeConflict {
                entity: self.entity_iri(entity).to_string(),
                existing: existing.clone(),
                new: label.to_owned(),
            }),
            Some(_) => Ok(()),
            None => {
                self.entity_types.insert(entity, label.to_owned());
                Ok(())
            }
        }
    }

    /// Types every endpoint of a schema-bearing relation from the schema.
    /// An endpoint already carrying a different type is a conflict.
    pub fn infer_entity_types(&mut self) -> Result<(), KgError> {
        let schemas = self.schemas.clone();
        for schema in &schemas {
            let edges: Vec<Pair> = self.edges(schema.relation).iter().copied().collect();
            for (s, o) in edges {
                self.assign_type(s, &schema.domain_type)?;
                self.assign_type(o, &schema.range_type)?;
            }
        }
        Ok(())
    }

    /// Candidate subjects for a relation: entities of its domain type when a
    /// schema and types are known, otherwise the observed subjects. Sorted by id.
    pub fn domain_entities(&self, relation: RelationId) -> Vec<EntityId> {
        self.endpoint_candidates(relation, true)
    }

    /// Candidate objects for a relation; see [`Self::domain_entities`].
    pub fn range_entities(&self, relation: RelationId) -> Vec<EntityId> {
        self.endpoint_candidates(relation, false)
    }

    fn endpoint_candidates(&self, relation: RelationId, subject_side: bool) -> Vec<EntityId> {
        if let Some(schema) = self.schema(relation) {
            let label = if subject_side {
                &schema.domain_type
            } else {
                &schema.range_type
            };
            let typed: Vec<EntityId> = self
                .entity_types
                .iter()
                .filter(|(_, t)| *t == label)
                .map(|(&e, _)| e)
                .collect();
            if !typed.is_empty() {
                return typed;
            }
        }
        let mut observed: Vec<EntityId> = self
            .edges(relation)
            .iter()
            .map(|&(s, o)| if subject_side { s } else { o })
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        observed.sort_unstable();
        observed
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str, p: &str, o: &str) -> Triple {
        Triple::parse(s, p, o).unwrap()
    }

    #[test]
    fn iri_rejects_empty_and_whitespace() {
        assert!(Iri::new("").is_err());
        assert!(Iri::new("a b").is_err());
        assert!(Iri::new("a\tb").is_err());
        assert_eq!(Iri::new("gene:1").unwrap().as_str(), "gene:1");
    }

    #[test]
    fn listing_two_triple_inserts() {
        let mut kg = KnowledgeGraph::default();
        let triple = t("gene:10155", "obo:RO_0000085", "obo:GO_0000122");
        assert_eq!(kg.add_triple(&triple).unwrap(), Insertion::Inserted);
        assert_eq!(kg.relation_stats()["obo:RO_0000085"], 1);
        assert_eq!(kg.add_triple(&triple).unwrap(), Insertion::Duplicate);
        assert_eq!(kg.relation_stats()["obo:RO_0000085"], 1);
    }

    #[test]
    fn strict_mode_refuses_shared_pair() {
        let mut kg = KnowledgeGraph::default();
        kg.add_triple(&t("u", "r1", "v")).unwrap();
        let err = kg.add_triple(&t("u", "r2", "v")).unwrap_err();
        assert!(matches!(err, KgError::AmbiguousPair { .. }));
        assert_eq!(err.code(), "kg/ambiguous-pair");
        // the refused triple leaves no trace
        assert!(kg.relation_id("r2").is_none());
    }

    #[test]
    fn lenient_mode_records_violation() {
        let mut kg = KnowledgeGraph::new(AmbiguityMode::Lenient);
        kg.add_triple(&t("u", "r1", "v")).unwrap();
        kg.add_triple(&t("u", "r2", "v")).unwrap();
        kg.add_triple(&t("u", "r2", "w")).unwrap();
        let v = kg.verify_flattening_safety();
        assert_eq!(v.len(), 1);
        let names: Vec<&str> = v[0].relations.iter().map(|&r| kg.relation_iri(r).as_str()).collect();
        assert_eq!(names, ["r1", "r2"]);
    }

    #[test]
    fn empty_graph_has_empty_stats() {
        assert!(KnowledgeGraph::default().relation_stats().is_empty());
        assert!(KnowledgeGraph::default().verify_flattening_safety().is_empty());
    }

    #[test]
    fn dictionary_ids_are_first_seen() {
        let mut kg = KnowledgeGraph::default();
        kg.add_triple(&t("b", "r", "a")).unwrap();
        kg.add_triple(&t("a", "r", "c")).unwrap();
        assert_eq!(kg.entity_id("b"), Some(EntityId(0)));
        assert_eq!(kg.entity_id("a"), Some(EntityId(1)));
        assert_eq!(kg.entity_id("c"), Some(EntityId(2)));
    }

    #[test]
    fn schemas_must_not_overlap() {
        let mut kg = KnowledgeGraph::default();
        kg.declare_schema(&Iri::new("has-function").unwrap(), "Gene", "Function").unwrap();
        let err = kg
            .declare_schema(&Iri::new("has-other").unwrap(), "Gene", "Function")
            .unwrap_err();
        assert!(matches!(err, KgError::SchemaOverlap { .. }));
        // redeclaring the same relation is fine
        kg.declare_schema(&Iri::new("has-function").unwrap(), "Gene", "Function").unwrap();
    }

    #[test]
    fn type_inference_and_conflicts() {
        let mut kg = KnowledgeGraph::default();
        kg.declare_schema(&Iri::new("r").unwrap(), "A", "B").unwrap();
        kg.declare_schema(&Iri::new("q").unwrap(), "B", "A").unwrap();
        kg.add_triple(&t("a1", "r", "b1")).unwrap();
        kg.add_triple(&t("b1", "q", "a2")).unwrap();
        kg.infer_entity_types().unwrap();
        let r = kg.relation_id("r").unwrap();
        assert_eq!(kg.domain_entities(r), vec![kg.entity_id("a1").unwrap(), kg.entity_id("a2").unwrap()]);
        assert_eq!(kg.range_entities(r), vec![kg.entity_id("b1").unwrap()]);

        kg.add_triple(&t("a1", "q", "x9")).unwrap();
        assert!(matches!(kg.infer_entity_types(), Err(KgError::TypeConflict { .. })));
    }

    #[test]
    fn untyped_candidates_fall_back_to_observed_endpoints() {
        let mut kg = KnowledgeGraph::default();
        kg.add_triple(&t("a", "r", "x")).unwrap();
        kg.add_triple(&t("b", "r", "x")).unwrap();
        let r = kg.relation_id("r").unwrap();
        assert_eq!(kg.domain_entities(r).len(), 2);
        assert_eq!(kg.range_entities(r).len(), 1);
    }
}
