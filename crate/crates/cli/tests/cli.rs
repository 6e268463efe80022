use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kglp_core::rdf::serialize_triple;
use kglp_core::synth::ReifiedSpec;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn kglp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kglp"))
        .args(args)
        .env_remove("KGLP_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn evaluate_on_the_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = kglp(&[
        "evaluate",
        "--triples",
        path(&fixture("synthetic-200.nt")),
        "--dims",
        "4,8",
        "--seed",
        "1",
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("relates-to\td=4") && text.contains("relates-to\td=8"), "{text}");
    assert_eq!(fs::read_to_string(out.join("metrics.csv")).unwrap().lines().count(), 11);
}

#[test]
fn seed_flag_and_environment_agree() {
    let dir = tempfile::tempdir().unwrap();
    let triples = fixture("synthetic-200.nt");
    let run = |extra: &[&str], env: Option<&str>, name: &str| {
        let out = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_kglp"));
        cmd.args(["evaluate", "--triples", path(&triples), "--dims", "4", "--out", path(&out)])
            .args(extra)
            .env_remove("KGLP_SEED");
        if let Some(seed) = env {
            cmd.env("KGLP_SEED", seed);
        }
        assert!(cmd.output().unwrap().status.success());
        fs::read(out.join("metrics.csv")).unwrap()
    };
    assert_eq!(run(&["--seed", "7"], None, "flag"), run(&[], Some("7"), "env"));
    assert_eq!(run(&["--seed", "7"], Some("8"), "both"), run(&[], Some("7"), "env2"));
}

#[test]
fn bad_fold_count_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = kglp(&[
        "evaluate",
        "--triples",
        path(&fixture("synthetic-200.nt")),
        "--folds",
        "1",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("folds"), "{}", stderr(&o));
}

#[test]
fn unknown_relation_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = kglp(&[
        "evaluate",
        "--triples",
        path(&fixture("synthetic-200.nt")),
        "--relation",
        "has-nothing",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn leaky_split_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let o = kglp(&[
        "evaluate",
        "--triples",
        path(&fixture("synthetic-200.nt")),
        "--split-file",
        path(&fixture("leaky-split.tsv")),
        "--dims",
        "4",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(4));
    let err = stderr(&o);
    assert!(err.contains("synth/d7") && err.contains("synth/r6"), "{err}");
}

#[test]
fn flatten_keeps_relation_counts() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ReifiedSpec {
        assertions: 300,
        relations: 3,
        direct_fraction: 0.25,
        seed: 2,
        ..ReifiedSpec::default()
    };
    let nt = dir.path().join("reified.nt");
    fs::write(&nt, spec.triples().iter().map(|t| serialize_triple(t) + "\n").collect::<String>()).unwrap();
    let raw = dir.path().join("raw.snapshot");
    let flat = dir.path().join("flat.snapshot");
    assert!(kglp(&["ingest", "--triples", path(&nt), "--out", path(&raw)]).status.success());
    assert!(kglp(&["flatten", "--graph", path(&raw), "--out", path(&flat)]).status.success());

    let before: serde_json::Value = serde_json::from_str(&stdout(&kglp(&["stats", "--graph", path(&raw), "--json"]))).unwrap();
    let after: serde_json::Value = serde_json::from_str(&stdout(&kglp(&["stats", "--graph", path(&flat), "--json"]))).unwrap();
    for (r, &n) in spec.counts().iter().enumerate() {
        let rel = ReifiedSpec::relation_iri(r);
        assert_eq!(before[&rel], n);
        assert_eq!(after[&rel], n);
    }
    assert!(before.get(kglp_core::kg::RDF_TYPE).is_some());
    assert!(after.get(kglp_core::kg::RDF_TYPE).is_none());
}

#[test]
fn stats_reads_prefixed_input() {
    let dir = tempfile::tempdir().unwrap();
    let ttl = dir.path().join("listing.nt");
    fs::write(&ttl, "gene:10155 obo:RO_0000085 obo:GO_0000122 .\n# comment\n\n").unwrap();
    let o = kglp(&[
        "stats",
        "--triples",
        path(&ttl),
        "--prefix",
        "gene=http://www.ncbi.nlm.nih.gov/gene/",
        "--prefix",
        "obo=http://purl.obolibrary.org/obo/",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("http://purl.obolibrary.org/obo/RO_0000085\t1"));
}

#[test]
fn embed_reports_wall_clock() {
    let dir = tempfile::tempdir().unwrap();
    let emb = dir.path().join("emb.txt");
    let o = kglp(&[
        "embed",
        "--triples",
        path(&fixture("synthetic-200.nt")),
        "--dim",
        "8",
        "--epochs",
        "2",
        "--out",
        path(&emb),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(report["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(report["epoch_losses"].as_array().unwrap().len(), 2);
    assert_eq!(report["edges"], 200);
    assert!(fs::metadata(&emb).unwrap().len() > 0);
}

#[test]
fn report_renders_signed_deltas() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("metrics.csv");
    let mut text = String::from("relation,dim,fold,f_measure,roc_auc\n");
    for fold in 0..5 {
        text += &format!("has-indication,50,{fold},0.999000,0.790000\n");
        text += &format!("has-target,50,{fold},0.920000,0.970000\n");
    }
    fs::write(&csv, text).unwrap();
    let o = kglp(&["report", "--metrics", path(&csv)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = stdout(&o);
    assert!(table.contains("+0.279") && table.contains("-0.020") && table.contains("+0.000"), "{table}");

    fs::write(&csv, "relation,dim,fold,f_measure,roc_auc\nhas-nothing,50,0,0.5,0.5\n").unwrap();
    assert_eq!(kglp(&["report", "--metrics", path(&csv)]).status.code(), Some(3));
}

#[test]
fn synth_writes_parseable_triples() {
    let dir = tempfile::tempdir().unwrap();
    let nt = dir.path().join("random.nt");
    let o = kglp(&["synth", "--kind", "random", "--entities", "50", "--edges", "300", "--out", path(&nt)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stats: serde_json::Value = serde_json::from_str(&stdout(&kglp(&["stats", "--triples", path(&nt), "--json"]))).unwrap();
    assert_eq!(stats.as_object().unwrap().values().map(|v| v.as_u64().unwrap()).sum::<u64>(), 300);
}
