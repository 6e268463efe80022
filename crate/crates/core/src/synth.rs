//! Synthetic graphs with known structure, for tests, benchmarks and the
//! bundled fixture.

use std::collections::HashSet;

use rand::seq::index::sample;
use rand::Rng as _;

use crate::kg::{AmbiguityMode, EntityId, Iri, KgError, KnowledgeGraph, Pair, Triple, RDF_TYPE};
use crate::rng::{derive_seed, rng};

pub const SYNTH_NS: &str = "http://kglp.example/synth/";

/// Bipartite relation whose edges are the top-scoring pairs under hidden
/// non-negative factors: `score(i, j) = a_i · b_j` with entries drawn from
/// `U(0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentFactorSpec {
    pub domain: usize,
    pub range: usize,
    pub rank: usize,
    pub positive_fraction: f64,
    pub seed: u64,
}

impl Default for LatentFactorSpec {
    fn default() -> Self {
        LatentFactorSpec {
            domain: 200,
            range: 200,
            rank: 5,
            positive_fraction: 0.05,
            seed: 0,
        }
    }
}

impl LatentFactorSpec {
    pub fn relation_iri(&self) -> String {
        format!("{SYNTH_NS}relates-to")
    }

    pub fn num_positives(&self) -> usize {
        ((self.domain * self.range) as f64 * self.positive_fraction).round() as usize
    }

    /// Ground-truth factor rows: domain entities first, then range entities.
    pub fn factors(&self) -> Vec<Vec<f64>> {
        let mut r = rng(derive_seed(self.seed, "latent-factors"));
        (0..self.domain + self.range)
            .map(|_| (0..self.rank).map(|_| r.random::<f64>()).collect())
            .collect()
    }

    /// Positive `(domain index, range index)` pairs, highest score first;
    /// ties keep row-major order.
    pub fn positives(&self) -> Vec<(usize, usize)> {
        let f = self.factors();
        let mut scored: Vec<(f64, usize, usize)> = (0..self.domain)
            .flat_map(|i| (0..self.range).map(move |j| (i, j)))
            .map(|(i, j)| {
                let s: f64 = f[i].iter().zip(&f[self.domain + j]).map(|(a, b)| a * b).sum();
                (s, i, j)
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        scored.truncate(self.num_positives());
        scored.into_iter().map(|(_, i, j)| (i, j)).collect()
    }

    pub fn domain_iri(i: usize) -> String {
        format!("{SYNTH_NS}d{i}")
    }

    pub fn range_iri(j: usize) -> String {
        format!("{SYNTH_NS}r{j}")
    }

    pub fn triples(&self) -> Vec<Triple> {
        let rel = self.relation_iri();
        let mut pairs = self.positives();
        pairs.sort_unstable();
        pairs
            .into_iter()
            .map(|(i, j)| Triple::parse(&Self::domain_iri(i), &rel, &Self::range_iri(j)).expect("valid IRIs"))
            .collect()
    }

    /// The relation with a `domain -> range` schema; every entity is
    /// registered and typed, including those without edges.
    pub fn graph(&self) -> KnowledgeGraph {
        let mut kg = KnowledgeGraph::new(AmbiguityMode::Strict);
        let rel = Iri::new(self.relation_iri()).expect("valid IRI");
        kg.declare_schema(&rel, "domain", "range").expect("single schema");
        for i in 0..self.domain {
            kg.set_entity_type(&Iri::new(Self::domain_iri(i)).expect("valid IRI"), "domain")
                .expect("fresh entity");
        }
        for j in 0..self.range {
            kg.set_entity_type(&Iri::new(Self::range_iri(j)).expect("valid IRI"), "range")
                .expect("fresh entity");
        }
        for t in self.triples() {
            kg.add_triple(&t).expect("distinct pairs");
        }
        kg
    }
}

/// Strictly asymmetric relation over a single entity type. Every node owns
/// an out-factor `a_i` with entries `U(0, 1)` and the complementary
/// in-factor `b_i = 1 - a_i`, so nodes that emit many edges receive few.
/// The top-scoring ordered pairs under `a_u · b_v` become edges, skipping
/// self-loops and any pair whose reverse was already taken.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectedFactorSpec {
    pub nodes: usize,
    pub rank: usize,
    pub positive_fraction: f64,
    pub seed: u64,
}

impl Default for DirectedFactorSpec {
    fn default() -> Self {
        DirectedFactorSpec {
            nodes: 300,
            rank: 5,
            positive_fraction: 0.05,
            seed: 0,
        }
    }
}

impl DirectedFactorSpec {
    pub fn relation_iri(&self) -> String {
        format!("{SYNTH_NS}precedes")
    }

    pub fn node_iri(i: usize) -> String {
        format!("{SYNTH_NS}n{i}")
    }

    pub fn num_positives(&self) -> usize {
        ((self.nodes * (self.nodes - 1)) as f64 * self.positive_fraction).round() as usize
    }

    pub fn positives(&self) -> Vec<(usize, usize)> {
        let mut r = rng(derive_seed(self.seed, "directed-factors"));
        let out: Vec<Vec<f64>> = (0..self.nodes)
            .map(|_| (0..self.rank).map(|_| r.random::<f64>()).collect())
            .collect();
        let inn: Vec<Vec<f64>> = out.iter().map(|a| a.iter().map(|x| 1.0 - x).collect()).collect();
        let mut scored: Vec<(f64, usize, usize)> = (0..self.nodes)
            .flat_map(|i| (0..self.nodes).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| (out[i].iter().zip(&inn[j]).map(|(a, b)| a * b).sum(), i, j))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        let mut taken = HashSet::new();
        let mut picked = Vec::new();
        for (_, i, j) in scored {
            if picked.len() == self.num_positives() {
                break;
            }
            if !taken.contains(&(j, i)) {
                taken.insert((i, j));
                picked.push((i, j));
            }
        }
        picked
    }

    pub fn graph(&self) -> KnowledgeGraph {
        let mut kg = KnowledgeGraph::new(AmbiguityMode::Strict);
        let rel = Iri::new(self.relation_iri()).expect("valid IRI");
        kg.declare_schema(&rel, "node", "node").expect("single schema");
        let iris: Vec<Iri> = (0..self.nodes).map(|i| Iri::new(Self::node_iri(i)).expect("valid IRI")).collect();
        for iri in &iris {
            kg.set_entity_type(iri, "node").expect("fresh entity");
        }
        let mut pairs = self.positives();
        pairs.sort_unstable();
        for (i, j) in pairs {
            kg.add_triple(&Triple::new(iris[i].clone(), rel.clone(), iris[j].clone()))
                .expect("distinct pairs");
        }
        kg
    }
}

/// Raw triples in which each assertion `(s, r, c)` is written either
/// directly or reified as `(s, r, instance_k)` plus `(instance_k, rdf:type, c)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReifiedSpec {
    pub assertions: usize,
    pub relations: usize,
    pub subjects_per_relation: usize,
    pub classes_per_relation: usize,
    /// Share of assertions written directly instead of reified.
    pub direct_fraction: f64,
    pub seed: u64,
}

impl Default for ReifiedSpec {
    fn default() -> Self {
        ReifiedSpec {
            assertions: 1000,
            relations: 3,
            subjects_per_relation: 100,
            classes_per_relation: 100,
            direct_fraction: 0.0,
            seed: 0,
        }
    }
}

impl ReifiedSpec {
    pub fn relation_iri(r: usize) -> String {
        format!("{SYNTH_NS}rel{r}")
    }

    /// Each relation draws distinct `(subject, class)` pairs from its own
    /// namespace, so the flattened graph has no ambiguous pairs.
    pub fn triples(&self) -> Vec<Triple> {
        let mut r = rng(self.seed);
        let per_rel = self.subjects_per_relation * self.classes_per_relation;
        let mut out = Vec::new();
        let mut instance = 0usize;
        for (rel, count) in self.counts().into_iter().enumerate() {
            assert!(count <= per_rel, "relation {rel} cannot hold {count} distinct pairs");
            let predicate = Self::relation_iri(rel);
            for flat in sample(&mut r, per_rel, count) {
                let s = format!("{SYNTH_NS}rel{rel}/s{}", flat / self.classes_per_relation);
                let c = format!("{SYNTH_NS}rel{rel}/c{}", flat % self.classes_per_relation);
                if r.random::<f64>() < self.direct_fraction {
                    out.push(Triple::parse(&s, &predicate, &c).expect("valid IRIs"));
                } else {
                    let node = format!("{SYNTH_NS}node/instance_{instance}");
                    instance += 1;
                    out.push(Triple::parse(&s, &predicate, &node).expect("valid IRIs"));
                    out.push(Triple::parse(&node, RDF_TYPE, &c).expect("valid IRIs"));
                }
            }
        }
        out
    }

    /// Assertions per relation, spread as evenly as possible.
    pub fn counts(&self) -> Vec<usize> {
        (0..self.relations)
            .map(|r| self.assertions / self.relations + usize::from(r < self.assertions % self.relations))
            .collect()
    }
}

pub fn graph_from_triples(triples: &[Triple], mode: AmbiguityMode) -> Result<KnowledgeGraph, KgError> {
    let mut kg = KnowledgeGraph::new(mode);
    for t in triples {
        kg.add_triple(t)?;
    }
    Ok(kg)
}

/// `edges` distinct directed pairs without self-loops over `entities` nodes.
pub fn random_edges(entities: usize, edges: usize, seed: u64) -> Vec<Pair> {
    assert!(entities >= 2 && edges <= entities * (entities - 1), "too many edges requested");
    let mut r = rng(seed);
    let mut seen = HashSet::with_capacity(edges);
    let mut out = Vec::with_capacity(edges);
    while out.len() < edges {
        let s = r.random_range(0..entities as u32);
        let o = r.random_range(0..entities as u32);
        if s != o && seen.insert((s, o)) {
            out.push((EntityId(s), EntityId(o)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latent_factor_sizes() {
        let spec = LatentFactorSpec::default();
        let kg = spec.graph();
        assert_eq!(kg.num_entities(), 400);
        assert_eq!(kg.num_edges(), 2000);
        let r = kg.relation_id(&spec.relation_iri()).unwrap();
        assert_eq!(kg.domain_entities(r).len(), 200);
        assert_eq!(kg.range_entities(r).len(), 200);
        assert_eq!(spec.positives(), spec.positives());
    }

    #[test]
    fn reified_triples_have_expected_shape() {
        let spec = ReifiedSpec {
            assertions: 10,
            relations: 3,
            direct_fraction: 0.5,
            seed: 4,
            ..ReifiedSpec::default()
        };
        assert_eq!(spec.counts(), vec![4, 3, 3]);
        let triples = spec.triples();
        let typed = triples.iter().filter(|t| t.predicate.as_str() == RDF_TYPE).count();
        assert_eq!(triples.len(), 10 + typed);
    }

    #[test]
    fn random_edges_are_distinct() {
        let e = random_edges(50, 1000, 1);
        let set: HashSet<Pair> = e.iter().copied().collect();
        assert_eq!(set.len(), 1000);
        assert!(e.iter().all(|(s, o)| s != o));
    }
}
