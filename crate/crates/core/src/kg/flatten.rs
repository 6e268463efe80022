//! Collapsing of reified relation instances.
//!
//! A reified assertion `(s, r, b)` + `(b, rdf:type, c)`, where `b` is an
//! anonymous instance node, is rewritten to the direct edge `(s, r, c)`.
//! The typing edge of `b` is dropped together with `b` itself.

use std::collections::HashMap;

use regex::Regex;

use super::{EntityId, Iri, KgError, KnowledgeGraph, Pair, RelationId};

pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";

/// Decides which entities are anonymous instance nodes.
#[derive(Clone, Debug)]
pub struct AnonymousMatcher {
    pattern: Regex,
    structural: bool,
}

impl Default for AnonymousMatcher {
    fn default() -> Self {
        AnonymousMatcher {
            pattern: Regex::new(r"instance_[0-9]+$").expect("valid default pattern"),
            structural: false,
        }
    }
}

impl AnonymousMatcher {
    pub fn with_pattern(pattern: &str) -> Result<Self, regex::Error> {
        Ok(AnonymousMatcher {
            pattern: Regex::new(pattern)?,
            structural: false,
        })
    }

    /// Also treat as anonymous any node that is the object of exactly one
    /// non-type edge, the subject of exactly one type edge, and nothing else.
    pub fn structural_fallback(mut self, enabled: bool) -> Self {
        self.structural = enabled;
        self
    }

    pub fn matches_iri(&self, iri: &str) -> bool {
        self.pattern.is_match(iri)
    }
}

#[derive(Clone, Debug)]
pub struct FlattenConfig {
    pub matcher: AnonymousMatcher,
    pub type_predicate: Iri,
}

impl Default for FlattenConfig {
    fn default() -> Self {
        FlattenConfig {
            matcher: AnonymousMatcher::default(),
            type_predicate: Iri::new(RDF_TYPE).expect("valid IRI"),
        }
    }
}

#[derive(Default, Clone, Copy)]
struct Usage {
    object_of_relation: usize,
    subject_of_relation: usize,
    subject_of_type: usize,
    object_of_type: usize,
}

/// Rewrites every reification pattern to a direct edge.
///
/// A graph without anonymous nodes is returned unchanged. Otherwise the
/// result is rebuilt relation by relation, so applying the rewrite a second
/// time yields an identical graph.
pub fn collapse_anonymous_instances(
    kg: &KnowledgeGraph,
    config: &FlattenConfig,
) -> Result<KnowledgeGraph, KgError> {
    let type_rel = kg.relation_id(config.type_predicate.as_str());

    let mut usage = vec![Usage::default(); kg.num_entities()];
    for r in kg.relation_ids() {
        let is_type = Some(r) == type_rel;
        for &(s, o) in kg.edges(r) {
            if is_type {
                usage[s.index()].subject_of_type += 1;
                usage[o.index()].object_of_type += 1;
            } else {
                usage[s.index()].subject_of_relation += 1;
                usage[o.index()].object_of_relation += 1;
            }
        }
    }

    let anonymous: Vec<bool> = (0..kg.num_entities())
        .map(|i| {
            let u = usage[i];
            let by_name = config.matcher.matches_iri(kg.entity_iri(EntityId(i as u32)).as_str());
            let by_shape = config.matcher.structural
                && u.object_of_relation == 1
                && u.subject_of_type == 1
                && u.subject_of_relation == 0
                && u.object_of_type == 0;
            // a node used as a class (type object) is never an instance
            (by_name || by_shape) && u.object_of_type == 0
        })
        .collect();

    if !anonymous.iter().any(|&a| a) {
        return Ok(kg.clone());
    }

    let mut class_of: HashMap<EntityId, EntityId> = HashMap::new();
    if let Some(tr) = type_rel {
        for &(s, o) in kg.edges(tr) {
            if anonymous[s.index()] {
                class_of.insert(s, o);
            }
        }
    }
    for (i, _) in anonymous.iter().enumerate().filter(|(_, &a)| a) {
        let n = usage[i].subject_of_type;
        if n != 1 {
            return Err(KgError::DanglingAnonymous {
                iri: kg.entity_iri(EntityId(i as u32)).to_string(),
                type_edges: n,
            });
        }
    }

    let resolve = |e: EntityId| -> EntityId {
        if anonymous[e.index()] {
            class_of[&e]
        } else {
            e
        }
    };

    let mut out = KnowledgeGraph::new(kg.mode());
    let mut relation_map: HashMap<RelationId, RelationId> = HashMap::new();
    for r in kg.relation_ids() {
        let is_type = Some(r) == type_rel;
        for &(s, o) in kg.edges(r) {
            if is_type && anonymous[s.index()] {
                continue;
            }
            let (s, o): Pair = (resolve(s), resolve(o));
            let new_r = *relation_map
                .entry(r)
                .or_insert_with(|| out.register_relation(kg.relation_iri(r)));
            let new_s = out.register_entity(kg.entity_iri(s));
            let new_o = out.register_entity(kg.entity_iri(o));
            if out.mode() == super::AmbiguityMode::Strict {
                if let Some(&owner) = out.pair_owner.get(&(new_s, new_o)) {
                    if owner != new_r {
                        return Err(KgError::AmbiguousPair {
                            subject: kg.entity_iri(s).to_string(),
                            object: kg.entity_iri(o).to_string(),
                            existing: out.relation_iri(owner).to_string(),
                            new: kg.relation_iri(r).to_string(),
                        });
                    }
                }
            }
            out.insert_ids(new_r, (new_s, new_o));
        }
    }

    for schema in kg.schemas() {
        out.declare_schema(kg.relation_iri(schema.relation), &schema.domain_type, &schema.range_type)?;
    }
    for (&e, label) in kg.entity_types() {
        if !anonymous[e.index()] {
            if let Some(new_e) = out.entity_id(kg.entity_iri(e).as_str()) {
                out.assign_type(new_e, label)?;
            }
        }
    }
    Ok(out)
}
