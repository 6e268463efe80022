//! Fold construction, type-consistent negative sampling and leakage audits.
//!
//! Negatives are rejected against every edge of the complete graph, not
//! only against the training split, so a test negative can never be a
//! true (held-out) edge.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use thiserror::Error;

use crate::kg::{EntityId, KnowledgeGraph, Pair, RelationId};
use crate::rng::{derive_seed, rng};

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("fold count must be at least 2, got {0}")]
    InvalidFoldCount(usize),
    #[error("relation has {edges} edges, fewer than {k} folds")]
    TooFewEdges { edges: usize, k: usize },
    #[error("negative pool of {pool} pairs cannot supply {requested}")]
    Exhausted { pool: u64, requested: usize },
    #[error("fold index {index} out of range for k = {k}")]
    FoldIndex { index: usize, k: usize },
    #[error("split file line {line}: {message}")]
    Format { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SplitError {
    pub fn code(&self) -> &'static str {
        match self {
            SplitError::InvalidFoldCount(_) => "split/invalid-fold-count",
            SplitError::TooFewEdges { .. } => "split/too-few-edges",
            SplitError::Exhausted { .. } => "split/exhausted",
            SplitError::FoldIndex { .. } => "split/fold-index",
            SplitError::Format { .. } => "split/format",
            SplitError::Io(_) => "split/io",
        }
    }
}

/// Partition of one relation's positive edges into `k` folds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldPlan {
    pub relation: RelationId,
    pub k: usize,
    pub folds: Vec<Vec<Pair>>,
    pub seed: u64,
}

/// Shuffles the relation's edges with `seed` and deals them into `k` folds;
/// the first `n mod k` folds receive one extra edge.
pub fn make_folds(
    kg: &KnowledgeGraph,
    relation: RelationId,
    k: usize,
    seed: u64,
) -> Result<FoldPlan, SplitError> {
    if k < 2 {
        return Err(SplitError::InvalidFoldCount(k));
    }
    let mut edges: Vec<Pair> = kg.edges(relation).iter().copied().collect();
    let n = edges.len();
    if n < k {
        return Err(SplitError::TooFewEdges { edges: n, k });
    }
    edges.shuffle(&mut rng(seed));
    let mut folds = Vec::with_capacity(k);
    let mut rest = edges.as_slice();
    for i in 0..k {
        let size = n / k + usize::from(i < n % k);
        let (head, tail) = rest.split_at(size);
        folds.push(head.to_vec());
        rest = tail;
    }
    Ok(FoldPlan {
        relation,
        k,
        folds,
        seed,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NegativeSet {
    pub relation: RelationId,
    pub pairs: Vec<Pair>,
    pub seed: u64,
}

impl NegativeSet {
    pub fn empty(relation: RelationId) -> Self {
        NegativeSet {
            relation,
            pairs: Vec::new(),
            seed: 0,
        }
    }
}

/// Draws `count` distinct pairs `(s, o)` with `s` of the relation's domain,
/// `o` of its range, not an edge anywhere in `kg`, and not in `excluded`.
///
/// Uniform rejection sampling is used while the free pool is large. When
/// the pool is less than twice the blocked pairs, or less than twice the
/// request, the free pairs are enumerated and sampled without replacement.
pub fn sample_negatives(
    kg: &KnowledgeGraph,
    relation: RelationId,
    count: usize,
    seed: u64,
    excluded: &NegativeSet,
) -> Result<NegativeSet, SplitError> {
    let domain = kg.domain_entities(relation);
    let range = kg.range_entities(relation);
    let mut in_domain = vec![false; kg.num_entities()];
    let mut in_range = vec![false; kg.num_entities()];
    domain.iter().for_each(|e| in_domain[e.index()] = true);
    range.iter().for_each(|e| in_range[e.index()] = true);
    let candidate = |(s, o): Pair| in_domain[s.index()] && in_range[o.index()];

    let excluded: HashSet<Pair> = excluded
        .pairs
        .iter()
        .copied()
        .filter(|&p| candidate(p) && !kg.has_pair(p))
        .collect();
    let blocked = kg.pairs().filter(|&p| candidate(p)).count() as u64 + excluded.len() as u64;
    let total = domain.len() as u64 * range.len() as u64;
    let pool = total - blocked;
    if pool < count as u64 {
        return Err(SplitError::Exhausted {
            pool,
            requested: count,
        });
    }

    let mut rng = rng(seed);
    let is_free = |p: Pair| !kg.has_pair(p) && !excluded.contains(&p);
    let pairs = if pool < 2 * blocked || pool < 2 * count as u64 {
        let free: Vec<Pair> = domain
            .iter()
            .flat_map(|&s| range.iter().map(move |&o| (s, o)))
            .filter(|&p| is_free(p))
            .collect();
        debug_assert_eq!(free.len() as u64, pool);
        index::sample(&mut rng, free.len(), count)
            .into_iter()
            .map(|i| free[i])
            .collect()
    } else {
        let mut chosen: HashSet<Pair> = HashSet::with_capacity(count);
        let mut pairs = Vec::with_capacity(count);
        while pairs.len() < count {
            let p = (
                domain[rng.random_range(0..domain.len())],
                range[rng.random_range(0..range.len())],
            );
            if is_free(p) && chosen.insert(p) {
                pairs.push(p);
            }
        }
        pairs
    };
    Ok(NegativeSet {
        relation,
        pairs,
        seed,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    TrainPos,
    TestPos,
    TrainNeg,
    TestNeg,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::TrainPos, Role::TestPos, Role::TrainNeg, Role::TestNeg];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::TrainPos => "train_pos",
            Role::TestPos => "test_pos",
            Role::TrainNeg => "train_neg",
            Role::TestNeg => "test_neg",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        Role::ALL.into_iter().find(|r| r.as_str() == s)
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Train/test positives and negatives for one fold of one relation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvaluationSplit {
    pub relation: RelationId,
    pub k: usize,
    pub fold: usize,
    pub seed: u64,
    pub train_pos: Vec<Pair>,
    pub test_pos: Vec<Pair>,
    pub train_neg: Vec<Pair>,
    pub test_neg: Vec<Pair>,
}

impl EvaluationSplit {
    pub fn role(&self, role: Role) -> &[Pair] {
        match role {
            Role::TrainPos => &self.train_pos,
            Role::TestPos => &self.test_pos,
            Role::TrainNeg => &self.train_neg,
            Role::TestNeg => &self.test_neg,
        }
    }

    fn role_mut(&mut self, role: Role) -> &mut Vec<Pair> {
        match role {
            Role::TrainPos => &mut self.train_pos,
            Role::TestPos => &mut self.test_pos,
            Role::TrainNeg => &mut self.train_neg,
            Role::TestNeg => &mut self.test_neg,
        }
    }
}

/// Holds out fold `test_fold_index` and draws as many negatives as
/// positives on each side; train negatives avoid the test negatives.
pub fn build_split(
    kg: &KnowledgeGraph,
    plan: &FoldPlan,
    test_fold_index: usize,
    seed: u64,
) -> Result<EvaluationSplit, SplitError> {
    if test_fold_index >= plan.k {
        return Err(SplitError::FoldIndex {
            index: test_fold_index,
            k: plan.k,
        });
    }
    let test_pos = plan.folds[test_fold_index].clone();
    let train_pos: Vec<Pair> = plan
        .folds
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != test_fold_index)
        .flat_map(|(_, f)| f.iter().copied())
        .collect();
    let none = NegativeSet::empty(plan.relation);
    let test_neg = sample_negatives(kg, plan.relation, test_pos.len(), derive_seed(seed, "test_neg"), &none)?;
    let train_neg = sample_negatives(kg, plan.relation, train_pos.len(), derive_seed(seed, "train_neg"), &test_neg)?;
    Ok(EvaluationSplit {
        relation: plan.relation,
        k: plan.k,
        fold: test_fold_index,
        seed,
        train_pos,
        test_pos,
        train_neg: train_neg.pairs,
        test_neg: test_neg.pairs,
    })
}

/// Edges the embedding model may see for this split: every edge of every
/// relation except the held-out test positives. Relation by relation in id
/// order; a pair shared by several relations (lenient graphs) appears once.
pub fn embedding_training_edges(kg: &KnowledgeGraph, split: &EvaluationSplit) -> Vec<Pair> {
    let held_out: HashSet<Pair> = split.test_pos.iter().copied().collect();
    let mut seen = HashSet::new();
    kg.relation_ids()
        .flat_map(|r| kg.edges(r).iter().copied())
        .filter(|p| !held_out.contains(p) && seen.insert(*p))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    TestEdgeInTraining(Pair),
    Overlap { first: Role, second: Role, pair: Pair },
    NegativeIsPositive { role: Role, pair: Pair },
}

impl Violation {
    pub fn pair(&self) -> Pair {
        match *self {
            Violation::TestEdgeInTraining(p) => p,
            Violation::Overlap { pair, .. } => pair,
            Violation::NegativeIsPositive { pair, .. } => pair,
        }
    }

    /// Human-readable description using entity IRIs.
    pub fn describe(&self, kg: &KnowledgeGraph) -> String {
        let (s, o) = self.pair();
        let edge = format!("({}, {})", kg.entity_iri(s), kg.entity_iri(o));
        match self {
            Violation::TestEdgeInTraining(_) => format!("test edge {edge} is in the embedding training edges"),
            Violation::Overlap { first, second, .. } => format!("pair {edge} is in both {first} and {second}"),
            Violation::NegativeIsPositive { role, .. } => format!("{role} pair {edge} is an edge of the graph"),
        }
    }
}

/// Reports every leak between a split, the edges used to train embeddings,
/// and the full graph. An empty result means clean.
pub fn audit_leakage(
    kg: &KnowledgeGraph,
    split: &EvaluationSplit,
    embedding_training_edges: &HashSet<Pair>,
) -> Vec<Violation> {
    let mut out = Vec::new();
    for &p in &split.test_pos {
        if embedding_training_edges.contains(&p) {
            out.push(Violation::TestEdgeInTraining(p));
        }
    }

    let mut roles_of: HashMap<Pair, Vec<Role>> = HashMap::new();
    let mut order = Vec::new();
    for role in Role::ALL {
        for &p in split.role(role) {
            let roles = roles_of.entry(p).or_insert_with(|| {
                order.push(p);
                Vec::new()
            });
            if !roles.contains(&role) {
                roles.push(role);
            }
        }
    }
    for p in order {
        let roles = &roles_of[&p];
        for (i, &first) in roles.iter().enumerate() {
            for &second in &roles[i + 1..] {
                out.push(Violation::Overlap { first, second, pair: p });
            }
        }
    }

    for role in [Role::TrainNeg, Role::TestNeg] {
        for &p in split.role(role) {
            if kg.has_pair(p) {
                out.push(Violation::NegativeIsPositive { role, pair: p });
            }
        }
    }
    out
}

/// Writes a split as `role<TAB>relation<TAB>subject<TAB>object` rows after a
/// `#` header recording relation, k, fold and seed.
pub fn write_split<W: Write>(kg: &KnowledgeGraph, split: &EvaluationSplit, mut w: W) -> std::io::Result<()> {
    let rel = kg.relation_iri(split.relation);
    writeln!(w, "# relation={rel} k={} fold={} seed={}", split.k, split.fold, split.seed)?;
    for role in Role::ALL {
        for &(s, o) in split.role(role) {
            writeln!(w, "{role}\t{rel}\t{}\t{}", kg.entity_iri(s), kg.entity_iri(o))?;
        }
    }
    w.flush()
}

/// Reads a split written by [`write_split`], resolving IRIs against `kg`.
pub fn read_split<R: BufRead>(kg: &KnowledgeGraph, reader: R) -> Result<EvaluationSplit, SplitError> {
    let fail = |line: u64, message: String| SplitError::Format { line, message };
    let mut header: Option<(RelationId, usize, usize, u64)> = None;
    let mut split: Option<EvaluationSplit> = None;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if let Some(rest) = line.strip_prefix('#') {
            if header.is_none() {
                let mut fields: HashMap<&str, &str> = HashMap::new();
                for tok in rest.split_whitespace() {
                    if let Some((k, v)) = tok.split_once('=') {
                        fields.insert(k, v);
                    }
                }
                let get = |k: &str| fields.get(k).copied().ok_or_else(|| fail(line_no, format!("header lacks {k}")));
                let rel_name = get("relation")?;
                let relation = kg
                    .relation_id(rel_name)
                    .ok_or_else(|| fail(line_no, format!("unknown relation {rel_name}")))?;
                let num = |k: &str| -> Result<u64, SplitError> {
                    get(k)?.parse().map_err(|_| fail(line_no, format!("bad {k}")))
                };
                let h = (relation, num("k")? as usize, num("fold")? as usize, num("seed")?);
                header = Some(h);
                split = Some(EvaluationSplit {
                    relation: h.0,
                    k: h.1,
                    fold: h.2,
                    seed: h.3,
                    train_pos: Vec::new(),
                    test_pos: Vec::new(),
                    train_neg: Vec::new(),
                    test_neg: Vec::new(),
                });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let split = split.as_mut().ok_or_else(|| fail(line_no, "row before header".into()))?;
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(fail(line_no, format!("expected 4 columns, found {}", cols.len())));
        }
        let role = Role::parse(cols[0]).ok_or_else(|| fail(line_no, format!("unknown role {}", cols[0])))?;
        if kg.relation_id(cols[1]) != Some(split.relation) {
            return Err(fail(line_no, format!("relation {} does not match header", cols[1])));
        }
        let entity = |iri: &str| -> Result<EntityId, SplitError> {
            kg.entity_id(iri).ok_or_else(|| fail(line_no, format!("unknown entity {iri}")))
        };
        let pair = (entity(cols[2])?, entity(cols[3])?);
        split.role_mut(role).push(pair);
    }
    split.ok_or_else(|| fail(0, "missing header".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{Iri, Triple};

    fn chain_graph(n: usize) -> KnowledgeGraph {
        let mut kg = KnowledgeGraph::default();
        for i in 0..n {
            kg.add_triple(&Triple::parse(&format!("s{i}"), "r", &format!("o{i}")).unwrap())
                .unwrap();
        }
        kg
    }

    #[test]
    fn ten_edges_five_folds() {
        let kg = chain_graph(10);
        let r = kg.relation_id("r").unwrap();
        let plan = make_folds(&kg, r, 5, 1).unwrap();
        assert!(plan.folds.iter().all(|f| f.len() == 2));
        let all: HashSet<Pair> = plan.folds.iter().flatten().copied().collect();
        assert_eq!(all.len(), 10);
        assert_eq!(plan, make_folds(&kg, r, 5, 1).unwrap());
        assert_ne!(plan, make_folds(&kg, r, 5, 2).unwrap());
    }

    #[test]
    fn fold_errors() {
        let kg = chain_graph(3);
        let r = kg.relation_id("r").unwrap();
        assert!(matches!(make_folds(&kg, r, 1, 0), Err(SplitError::InvalidFoldCount(1))));
        assert!(matches!(make_folds(&kg, r, 4, 0), Err(SplitError::TooFewEdges { edges: 3, k: 4 })));
    }

    fn toy() -> (KnowledgeGraph, RelationId) {
        let mut kg = KnowledgeGraph::default();
        let r = kg.declare_schema(&Iri::new("r").unwrap(), "D", "R").unwrap();
        for (e, t) in [("a", "D"), ("b", "D"), ("x", "R"), ("y", "R")] {
            kg.set_entity_type(&Iri::new(e).unwrap(), t).unwrap();
        }
        kg.add_triple(&Triple::parse("a", "r", "x").unwrap()).unwrap();
        (kg, r)
    }

    #[test]
    fn toy_pool_is_enumerated_exactly() {
        let (kg, r) = toy();
        let neg = sample_negatives(&kg, r, 3, 9, &NegativeSet::empty(r)).unwrap();
        let got: HashSet<(&str, &str)> = neg
            .pairs
            .iter()
            .map(|&(s, o)| (kg.entity_iri(s).as_str(), kg.entity_iri(o).as_str()))
            .collect();
        let want: HashSet<(&str, &str)> = [("a", "y"), ("b", "x"), ("b", "y")].into_iter().collect();
        assert_eq!(got, want);
        assert!(matches!(
            sample_negatives(&kg, r, 4, 9, &NegativeSet::empty(r)),
            Err(SplitError::Exhausted { pool: 3, requested: 4 })
        ));
    }

    #[test]
    fn complete_bipartite_is_exhausted() {
        let mut kg = KnowledgeGraph::default();
        for s in ["a", "b"] {
            for o in ["x", "y"] {
                kg.add_triple(&Triple::parse(s, "r", o).unwrap()).unwrap();
            }
        }
        let r = kg.relation_id("r").unwrap();
        assert!(matches!(
            sample_negatives(&kg, r, 1, 0, &NegativeSet::empty(r)),
            Err(SplitError::Exhausted { pool: 0, .. })
        ));
    }

    #[test]
    fn excluded_pairs_are_avoided() {
        let (kg, r) = toy();
        let first = sample_negatives(&kg, r, 1, 3, &NegativeSet::empty(r)).unwrap();
        let second = sample_negatives(&kg, r, 2, 4, &first).unwrap();
        assert!(second.pairs.iter().all(|p| !first.pairs.contains(p)));
        assert!(sample_negatives(&kg, r, 3, 4, &first).is_err());
    }

    #[test]
    fn split_cardinalities_and_clean_audit() {
        let kg = chain_graph(10);
        let r = kg.relation_id("r").unwrap();
        let plan = make_folds(&kg, r, 5, 11).unwrap();
        let split = build_split(&kg, &plan, 0, 12).unwrap();
        assert_eq!(
            (split.train_pos.len(), split.test_pos.len(), split.train_neg.len(), split.test_neg.len()),
            (8, 2, 8, 2)
        );
        let train: HashSet<Pair> = embedding_training_edges(&kg, &split).into_iter().collect();
        assert_eq!(train.len(), 8);
        assert!(audit_leakage(&kg, &split, &train).is_empty());
        assert!(matches!(build_split(&kg, &plan, 5, 0), Err(SplitError::FoldIndex { .. })));
    }

    #[test]
    fn planted_test_edge_is_reported_once() {
        let kg = chain_graph(10);
        let r = kg.relation_id("r").unwrap();
        let split = build_split(&kg, &make_folds(&kg, r, 5, 1).unwrap(), 2, 3).unwrap();
        let mut train: HashSet<Pair> = embedding_training_edges(&kg, &split).into_iter().collect();
        let leaked = split.test_pos[0];
        train.insert(leaked);
        assert_eq!(audit_leakage(&kg, &split, &train), vec![Violation::TestEdgeInTraining(leaked)]);
    }

    #[test]
    fn split_file_round_trip() {
        let kg = chain_graph(10);
        let r = kg.relation_id("r").unwrap();
        let split = build_split(&kg, &make_folds(&kg, r, 5, 1).unwrap(), 4, 77).unwrap();
        let mut buf = Vec::new();
        write_split(&kg, &split, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# relation=r k=5 fold=4 seed=77\n"));
        assert_eq!(read_split(&kg, buf.as_slice()).unwrap(), split);
        assert!(matches!(
            read_split(&kg, "# relation=r k=5 fold=0 seed=1\nbogus\tr\ts0\to0\n".as_bytes()),
            Err(SplitError::Format { line: 2, .. })
        ));
    }
}
