use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use kglp_core::pipeline::{run_pipeline, PipelineConfig, Precision};
use kglp_core::rdf::serialize_triple;
use kglp_core::synth::ReifiedSpec;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn fixture_config(out: &Path) -> PipelineConfig {
    PipelineConfig {
        triples: vec![fixture("synthetic-200.nt")],
        dims: vec![6],
        seed: 3,
        out: out.to_owned(),
        ..PipelineConfig::default()
    }
}

#[test]
fn fixture_run_writes_every_report() {
    let dir = tempfile::tempdir().unwrap();
    let run = run_pipeline(&fixture_config(dir.path())).unwrap();
    assert_eq!(run.rows.len(), 5);
    assert!(run.summary.faithful);
    assert_eq!(run.summary.results.len(), 1);
    assert_eq!(run.summary.relation_counts.values().sum::<usize>(), 200);
    for name in ["graph.snapshot", "metrics.csv", "summary.json", "deltas.txt", "effective-config.json", "manifest.json"] {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }
    assert_eq!(fs::read_dir(dir.path().join("splits")).unwrap().count(), 5);
    let csv = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    let effective = PipelineConfig::load(&dir.path().join("effective-config.json")).unwrap();
    assert_eq!(effective.hash(), run.summary.config_hash);
}

#[test]
fn written_splits_reproduce_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = fixture_config(&dir.path().join("a"));
    run_pipeline(&first).unwrap();
    let mut splits: Vec<PathBuf> = fs::read_dir(first.out.join("splits"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    splits.sort();
    let second = PipelineConfig {
        split_files: splits,
        out: dir.path().join("b"),
        ..first.clone()
    };
    run_pipeline(&second).unwrap();
    assert_eq!(
        fs::read(first.out.join("metrics.csv")).unwrap(),
        fs::read(second.out.join("metrics.csv")).unwrap()
    );
}

#[test]
fn manifest_stages_only_read_earlier_outputs() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(&fixture_config(dir.path())).unwrap();
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    let stages = manifest["stages"].as_array().unwrap();
    assert!(stages.len() >= 4);
    let mut produced: HashSet<&str> = HashSet::new();
    let later: Vec<HashSet<&str>> = stages
        .iter()
        .map(|s| s["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect())
        .collect();
    for (i, stage) in stages.iter().enumerate() {
        for input in stage["inputs"].as_array().unwrap() {
            let input = input.as_str().unwrap();
            for out in &later[i..] {
                assert!(!out.contains(input), "stage {i} reads {input}, written at or after it");
            }
        }
        produced.extend(&later[i]);
    }
    assert!(produced.contains("metrics.csv") && produced.contains("summary.json"));
}

#[test]
fn precision_and_thread_count_keep_results_stable() {
    let dir = tempfile::tempdir().unwrap();
    let base = fixture_config(&dir.path().join("one"));
    let pooled = PipelineConfig {
        threads: 3,
        out: dir.path().join("three"),
        ..base.clone()
    };
    let a = run_pipeline(&base).unwrap();
    let b = run_pipeline(&pooled).unwrap();
    assert_eq!(a.rows, b.rows);

    let wide = PipelineConfig {
        precision: Precision::F64,
        out: dir.path().join("f64"),
        ..base
    };
    let c = run_pipeline(&wide).unwrap();
    assert_eq!(c.rows.len(), 5);
    assert!(c.rows.iter().all(|r| (0.0..=1.0).contains(&r.roc_auc)));
}

#[test]
fn shared_embeddings_are_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let config = PipelineConfig {
        shared_embeddings: true,
        ..fixture_config(dir.path())
    };
    let run = run_pipeline(&config).unwrap();
    assert!(!run.summary.faithful);
    assert_eq!(run.rows.len(), 5);
    let summary = fs::read_to_string(dir.path().join("summary.json")).unwrap();
    assert!(summary.contains("\"faithful\": false"));
}

#[test]
fn leaky_split_stops_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = PipelineConfig {
        split_files: vec![fixture("leaky-split.tsv")],
        ..fixture_config(dir.path())
    };
    let err = run_pipeline(&config).unwrap_err();
    assert_eq!(err.exit_code(), 4);
    assert!(!dir.path().join("metrics.csv").exists());
}

#[test]
fn reified_input_is_flattened_before_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ReifiedSpec {
        assertions: 600,
        relations: 2,
        subjects_per_relation: 40,
        classes_per_relation: 40,
        direct_fraction: 0.2,
        seed: 8,
    };
    let nt = dir.path().join("reified.nt");
    fs::write(&nt, spec.triples().iter().map(|t| serialize_triple(t) + "\n").collect::<String>()).unwrap();
    let config = PipelineConfig {
        triples: vec![nt],
        dims: vec![4],
        folds: 3,
        out: dir.path().join("out"),
        ..PipelineConfig::default()
    };
    let run = run_pipeline(&config).unwrap();
    let counts: Vec<usize> = (0..2)
        .map(|r| run.summary.relation_counts[&ReifiedSpec::relation_iri(r)])
        .collect();
    assert_eq!(counts, spec.counts());
    assert_eq!(run.summary.relation_counts.len(), 2);
    assert_eq!(run.rows.len(), 6);
}

#[test]
fn invalid_configs_are_rejected_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let config = PipelineConfig {
        folds: 1,
        ..fixture_config(&dir.path().join("out"))
    };
    let err = run_pipeline(&config).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("folds"));
    assert!(!dir.path().join("out").exists());
}
