use std::collections::{BTreeMap, HashMap, HashSet};

use kglp_core::kg::{
    collapse_anonymous_instances, AmbiguityMode, EntityId, FlattenConfig, Pair, Triple, RDF_TYPE,
};
use kglp_core::metrics::{confusion, f_measure, roc_auc, ScoredExample};
use kglp_core::rdf::{parse_document, parse_line, serialize_triple, Payload, PrefixMap};
use kglp_core::split::{audit_leakage, build_split, embedding_training_edges, make_folds, sample_negatives, NegativeSet};
use kglp_core::synth::{graph_from_triples, random_edges, LatentFactorSpec, ReifiedSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn iri() -> impl Strategy<Value = String> {
    "(http://|urn:)[a-z]{1,6}\\.org/[A-Za-z0-9_#./-]{1,16}"
}

fn triple() -> impl Strategy<Value = Triple> {
    (iri(), iri(), iri()).prop_map(|(s, p, o)| Triple::parse(&s, &p, &o).unwrap())
}

fn small_triples(max: usize) -> impl Strategy<Value = Vec<Triple>> {
    let e = || (0..12u8).prop_map(|i| format!("http://e.org/{i}"));
    let r = (0..4u8).prop_map(|i| format!("http://r.org/{i}"));
    prop::collection::vec((e(), r, e()), 0..max)
        .prop_map(|v| v.into_iter().map(|(s, p, o)| Triple::parse(&s, &p, &o).unwrap()).collect())
}

fn reified_counts(triples: &[Triple]) -> BTreeMap<String, usize> {
    let type_of: HashMap<&str, &str> = triples
        .iter()
        .filter(|t| t.predicate.as_str() == RDF_TYPE)
        .map(|t| (t.subject.as_str(), t.object.as_str()))
        .collect();
    let mut seen: BTreeMap<String, HashSet<(&str, &str)>> = BTreeMap::new();
    for t in triples.iter().filter(|t| t.predicate.as_str() != RDF_TYPE) {
        let o = type_of.get(t.object.as_str()).copied().unwrap_or(t.object.as_str());
        seen.entry(t.predicate.to_string()).or_default().insert((t.subject.as_str(), o));
    }
    seen.into_iter().map(|(k, v)| (k, v.len())).collect()
}

fn examples(max: usize) -> impl Strategy<Value = Vec<ScoredExample<f64>>> {
    prop::collection::vec((-50i32..50, any::<bool>()), 2..max).prop_map(|v| {
        let mut ex: Vec<_> = v.into_iter().map(|(s, l)| ScoredExample::new(s as f64 / 10.0, l)).collect();
        ex[0].label = true;
        ex[1].label = false;
        ex
    })
}

proptest! {
    #[test]
    fn dictionary_is_a_bijection(triples in small_triples(60)) {
        let kg = graph_from_triples(&triples, AmbiguityMode::Lenient).unwrap();
        for i in 0..kg.num_entities() as u32 {
            let iri = kg.entity_iri(EntityId(i));
            prop_assert_eq!(kg.entity_id(iri.as_str()), Some(EntityId(i)));
        }
        for t in &triples {
            let id = kg.entity_id(t.subject.as_str()).unwrap();
            prop_assert_eq!(kg.entity_iri(id), &t.subject);
        }
    }

    #[test]
    fn safety_check_reports_exactly_the_shared_pairs(triples in small_triples(80)) {
        let kg = graph_from_triples(&triples, AmbiguityMode::Lenient).unwrap();
        let mut owners: HashMap<(&str, &str), HashSet<&str>> = HashMap::new();
        for t in &triples {
            owners.entry((t.subject.as_str(), t.object.as_str())).or_default().insert(t.predicate.as_str());
        }
        let shared = owners.values().filter(|r| r.len() > 1).count();
        let reported = kg.verify_flattening_safety();
        prop_assert_eq!(reported.len(), shared);
        if reported.is_empty() {
            prop_assert_eq!(kg.flattened_pairs().len(), kg.relation_stats().values().sum::<usize>());
        }
    }

    #[test]
    fn flattening_conserves_and_is_idempotent(
        assertions in 0usize..400,
        relations in 1usize..5,
        direct in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let spec = ReifiedSpec {
            assertions,
            relations,
            subjects_per_relation: 20,
            classes_per_relation: 25,
            direct_fraction: direct,
            seed,
        };
        let triples = spec.triples();
        let raw = graph_from_triples(&triples, AmbiguityMode::Strict).unwrap();
        let once = collapse_anonymous_instances(&raw, &FlattenConfig::default()).unwrap();
        let twice = collapse_anonymous_instances(&once, &FlattenConfig::default()).unwrap();
        prop_assert_eq!(once.relation_stats(), reified_counts(&triples));
        prop_assert_eq!(&once, &twice);
        prop_assert!(once.verify_flattening_safety().is_empty());
    }

    #[test]
    fn parse_line_is_total(line in "\\PC{0,80}") {
        if let Payload::Error { column, .. } = parse_line(&line, &PrefixMap::new()) {
            prop_assert!(column >= 1 && column <= line.chars().count() + 1);
        }
    }

    #[test]
    fn serialized_triples_parse_back(t in triple()) {
        prop_assert_eq!(parse_line(&serialize_triple(&t), &PrefixMap::new()), Payload::Triple(t));
    }

    #[test]
    fn prefix_expansion_concatenates(
        label in "[a-z][a-z0-9]{0,5}",
        ns in "http://[a-z]{1,8}\\.org/([a-z]{1,4}/)?",
        local in "[A-Za-z0-9_-]([A-Za-z0-9_./-]{0,10}[A-Za-z0-9_-])?",
    ) {
        let mut p = PrefixMap::new();
        p.insert(&label, &ns).unwrap();
        let line = format!("{label}:{local} {label}:p <urn:x> .");
        match parse_line(&line, &p) {
            Payload::Triple(t) => prop_assert_eq!(t.subject.as_str(), format!("{ns}{local}")),
            other => prop_assert!(false, "{line:?} gave {other:?}"),
        }
    }

    #[test]
    fn folds_partition_the_edges(edges in 2usize..300, k in 2usize..9, seed in any::<u64>()) {
        prop_assume!(edges >= k);
        let kg = graph_from_triples(&edge_triples(&random_edges(40, edges, seed)), AmbiguityMode::Strict).unwrap();
        let rel = kg.relation_ids().next().unwrap();
        let plan = make_folds(&kg, rel, k, seed).unwrap();
        prop_assert_eq!(&plan, &make_folds(&kg, rel, k, seed).unwrap());
        let mut all: Vec<Pair> = plan.folds.iter().flatten().copied().collect();
        prop_assert_eq!(all.len(), edges);
        all.sort_unstable();
        all.dedup();
        prop_assert_eq!(all.len(), edges);
        prop_assert!(all.iter().all(|&p| kg.has_edge(rel, p)));
        for f in &plan.folds {
            prop_assert!(f.len() == edges / k || f.len() == edges.div_ceil(k));
        }
    }

    #[test]
    fn negatives_are_typed_fresh_and_distinct(
        side in 6usize..25,
        fraction in 0.05f64..0.3,
        seed in any::<u64>(),
        want in 1usize..60,
    ) {
        let spec = LatentFactorSpec { domain: side, range: side + 3, rank: 2, positive_fraction: fraction, seed };
        let kg = spec.graph();
        let rel = kg.relation_id(&spec.relation_iri()).unwrap();
        let free = side * (side + 3) - kg.edges(rel).len();
        let want = want.min(free / 2);
        let first = sample_negatives(&kg, rel, want, seed, &NegativeSet::empty(rel)).unwrap();
        let second = sample_negatives(&kg, rel, free - want, seed ^ 1, &first).unwrap();
        for set in [&first, &second] {
            let unique: HashSet<Pair> = set.pairs.iter().copied().collect();
            prop_assert_eq!(unique.len(), set.pairs.len());
            for &(s, o) in &set.pairs {
                prop_assert!(!kg.has_pair((s, o)));
                prop_assert_eq!(kg.entity_type(s), Some("domain"));
                prop_assert_eq!(kg.entity_type(o), Some("range"));
            }
        }
        prop_assert_eq!(first.pairs.len(), want);
        prop_assert!(second.pairs.iter().all(|p| !first.pairs.contains(p)));
    }

    #[test]
    fn splits_are_balanced_and_clean(seed in any::<u64>(), k in 2usize..7) {
        let spec = LatentFactorSpec { domain: 30, range: 30, rank: 3, positive_fraction: 0.1, seed };
        let kg = spec.graph();
        let rel = kg.relation_id(&spec.relation_iri()).unwrap();
        let plan = make_folds(&kg, rel, k, seed).unwrap();
        let n = kg.edges(rel).len();
        for fold in 0..k {
            let split = build_split(&kg, &plan, fold, seed.wrapping_add(fold as u64)).unwrap();
            prop_assert_eq!(split.train_neg.len(), split.train_pos.len());
            prop_assert_eq!(split.test_neg.len(), split.test_pos.len());
            prop_assert!(split.test_pos.len().abs_diff(n / k) <= 1);
            let training: HashSet<Pair> = embedding_training_edges(&kg, &split).into_iter().collect();
            prop_assert!(audit_leakage(&kg, &split, &training).is_empty());
        }
    }

    #[test]
    fn auc_ignores_monotone_transforms(ex in examples(300)) {
        let base = roc_auc(&ex).unwrap();
        prop_assert!((0.0..=1.0).contains(&base));
        for f in [|x: f64| x.powi(3) + 2.0 * x, |x: f64| (x / 3.0).exp(), |x: f64| 7.0 * x - 100.0] {
            let moved: Vec<_> = ex.iter().map(|e| ScoredExample::new(f(e.score), e.label)).collect();
            prop_assert_eq!(roc_auc(&moved).unwrap(), base);
        }
        let flipped: Vec<_> = ex.iter().map(|e| ScoredExample::new(-e.score, !e.label)).collect();
        prop_assert_eq!(roc_auc(&flipped).unwrap(), base);
    }

    #[test]
    fn f_measure_is_a_function_of_the_confusion_matrix(
        ex in examples(200),
        thresholds in prop::collection::vec(-5.0f64..5.0, 1..6),
        seed in any::<u64>(),
    ) {
        let mut shuffled = ex.clone();
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, r.random_range(0..=i));
        }
        for &t in &thresholds {
            let f = f_measure(&ex, t).unwrap();
            prop_assert_eq!(f, f_measure(&shuffled, t).unwrap());
            let c = confusion(&ex, t);
            let expected = if c.tp == 0 { 0.0 } else { 2.0 * c.tp as f64 / (2 * c.tp + c.fp + c.fn_) as f64 };
            prop_assert!((f - expected).abs() < 1e-12);
        }
        let forward: Vec<f64> = thresholds.iter().map(|&t| f_measure(&ex, t).unwrap()).collect();
        let backward: Vec<f64> = thresholds.iter().rev().map(|&t| f_measure(&ex, t).unwrap()).collect();
        prop_assert_eq!(forward, backward.into_iter().rev().collect::<Vec<_>>());
    }
}

fn edge_triples(edges: &[Pair]) -> Vec<Triple> {
    edges
        .iter()
        .map(|(s, o)| Triple::parse(&format!("urn:n:{}", s.0), "urn:rel", &format!("urn:n:{}", o.0)).unwrap())
        .collect()
}

#[test]
fn ten_thousand_triples_round_trip_through_a_document() {
    let mut r = ChaCha8Rng::seed_from_u64(10_000);
    let triples: Vec<Triple> = (0..10_000)
        .map(|i| {
            Triple::parse(
                &format!("http://ex.org/s/{}", r.random_range(0..5000)),
                &format!("http://ex.org/p#{}", r.random_range(0..20)),
                &format!("urn:o:{i}-{}", r.random::<u32>()),
            )
            .unwrap()
        })
        .collect();
    let doc: String = triples.iter().map(|t| serialize_triple(t) + "\n").collect();
    let parsed: Vec<Triple> = parse_document(doc.as_bytes(), &PrefixMap::new())
        .map(|e| match e.unwrap().payload {
            Payload::Triple(t) => t,
            other => panic!("unexpected {other:?}"),
        })
        .collect();
    assert_eq!(parsed, triples);
}

#[test]
fn reified_graph_has_one_edge_per_assertion() {
    let spec = ReifiedSpec::default();
    let raw = graph_from_triples(&spec.triples(), AmbiguityMode::Strict).unwrap();
    let kg = collapse_anonymous_instances(&raw, &FlattenConfig::default()).unwrap();
    let counts: Vec<usize> = (0..spec.relations)
        .map(|r| kg.edges(kg.relation_id(&ReifiedSpec::relation_iri(r)).unwrap()).len())
        .collect();
    assert_eq!(counts, spec.counts());
}
