//! End-to-end evaluation: ingest, flatten, split, audit, embed, classify,
//! report.
//!
//! All randomness flows from the master seed through [`derive_seed`]:
//!
//! | stage                        | label                                 |
//! |------------------------------|---------------------------------------|
//! | fold assignment              | `folds/{relation}`                    |
//! | split negatives              | `split/{relation}/{fold}`             |
//! | embeddings (per fold)        | `embed/{relation}/{fold}/{dim}`       |
//! | embeddings (shared)          | `shared-embed/{fold}/{dim}`           |
//! | classifier                   | `classifier/{relation}/{fold}/{dim}`  |
//!
//! Outputs in the run directory: `graph.snapshot`, `splits/*.tsv`,
//! `metrics.csv`, `summary.json`, `deltas.txt`, `effective-config.json`
//! and `manifest.json`.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::embed::{self, TrainConfig};
use crate::kg::{
    collapse_anonymous_instances, write_snapshot, AmbiguityMode, AnonymousMatcher, FlattenConfig, KgError,
    KnowledgeGraph, Pair, RelationId, RDF_TYPE,
};
use crate::metrics::{
    cv, format_delta, write_metrics_csv, BaselineTable, CvError, CvSettings, FoldClassifier, FoldData,
    LogregClassifier, MetricRow, MlpClassifier, Summary,
};
use crate::model::{LogregConfig, MlpConfig, PairOperator};
use crate::rdf::{ingest_document, read_tsv_edges, PrefixMap, RdfError};
use crate::rng::derive_seed;
use crate::scalar::Scalar;
use crate::split::{build_split, read_split, write_split, EvaluationSplit, SplitError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Rdf { path: PathBuf, source: RdfError },
    #[error("{}: {source}", path.display())]
    SplitFile { path: PathBuf, source: SplitError },
    #[error(transparent)]
    Kg(#[from] KgError),
    #[error(transparent)]
    Cv(#[from] CvError),
    #[error("relation {0} is not in the graph")]
    UnknownRelation(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl PipelineError {
    fn config(field: &str, message: impl Into<String>) -> Self {
        PipelineError::Config {
            field: field.to_owned(),
            message: message.into(),
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            PipelineError::Config { .. } => "pipeline/config",
            PipelineError::Io { .. } => "pipeline/io",
            PipelineError::Rdf { source, .. } => source.code(),
            PipelineError::SplitFile { source, .. } => source.code(),
            PipelineError::Kg(e) => e.code(),
            PipelineError::Cv(e) => e.code(),
            PipelineError::UnknownRelation(_) => "kg/unknown-relation",
            PipelineError::Json(_) => "pipeline/json",
        }
    }

    /// 2 for configuration problems, 4 for leakage, 3 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config { .. } => 2,
            PipelineError::Cv(CvError::Leakage { .. }) => 4,
            _ => 3,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_owned(),
        source,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    #[default]
    Logreg,
    Mlp,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub kind: ClassifierKind,
    pub logreg: LogregConfig,
    pub mlp: MlpConfig,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaDecl {
    pub relation: String,
    pub domain: String,
    pub range: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlattenSettings {
    pub anonymous_pattern: String,
    pub structural_fallback: bool,
}

impl Default for FlattenSettings {
    fn default() -> Self {
        FlattenSettings {
            anonymous_pattern: "instance_[0-9]+$".into(),
            structural_fallback: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// N-Triples or prefixed-name documents.
    pub triples: Vec<PathBuf>,
    /// `relation<TAB>subject<TAB>object` edge lists.
    pub tsv: Vec<PathBuf>,
    /// JSON prefix file `{"prefixes": {label: namespace}}`.
    pub prefix_file: Option<PathBuf>,
    pub prefixes: BTreeMap<String, String>,
    pub schemas: Vec<SchemaDecl>,
    pub flatten: FlattenSettings,
    pub mode: AmbiguityMode,
    /// Relation IRIs or local names; empty means every relation but `rdf:type`.
    pub relations: Vec<String>,
    /// Pre-built splits used instead of generated folds.
    pub split_files: Vec<PathBuf>,
    pub dims: Vec<usize>,
    pub folds: usize,
    pub seed: u64,
    pub embed: TrainConfig,
    pub classifier: ClassifierConfig,
    pub operator: PairOperator,
    pub threshold: f64,
    pub precision: Precision,
    /// Worker pool size for `(relation, dim, fold)` tasks.
    pub threads: usize,
    /// Train one embedding per `(fold, dim)` for all relations.
    pub shared_embeddings: bool,
    /// Replaces the bundled baseline table.
    pub baseline: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            triples: Vec::new(),
            tsv: Vec::new(),
            prefix_file: None,
            prefixes: BTreeMap::new(),
            schemas: Vec::new(),
            flatten: FlattenSettings::default(),
            mode: AmbiguityMode::Strict,
            relations: Vec::new(),
            split_files: Vec::new(),
            dims: vec![5, 10, 20, 50],
            folds: 5,
            seed: 0,
            embed: TrainConfig::default(),
            classifier: ClassifierConfig::default(),
            operator: PairOperator::Concat,
            threshold: 0.5,
            precision: Precision::F32,
            threads: 1,
            shared_embeddings: false,
            baseline: None,
            out: PathBuf::from("kglp-out"),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::config("config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::config("config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.dims.is_empty() {
            return Err(PipelineError::config("dims", "must list at least one dimension"));
        }
        if self.dims.contains(&0) {
            return Err(PipelineError::config("dims", "dimensions must be positive"));
        }
        if self.folds < 2 {
            return Err(PipelineError::config("folds", format!("k must be at least 2, got {}", self.folds)));
        }
        if self.threads == 0 {
            return Err(PipelineError::config("threads", "must be at least 1"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(PipelineError::config("threshold", "must lie strictly between 0 and 1"));
        }
        if self.triples.is_empty() && self.tsv.is_empty() {
            return Err(PipelineError::config("triples", "no input files given"));
        }
        let paths = self
            .triples
            .iter()
            .map(|p| ("triples", p))
            .chain(self.tsv.iter().map(|p| ("tsv", p)))
            .chain(self.split_files.iter().map(|p| ("split_files", p)))
            .chain(self.prefix_file.iter().map(|p| ("prefix_file", p)))
            .chain(self.baseline.iter().map(|p| ("baseline", p)));
        for (field, path) in paths {
            if !path.exists() {
                return Err(PipelineError::config(field, format!("{} does not exist", path.display())));
            }
        }
        self.embed
            .validate()
            .map_err(|e| PipelineError::config("embed", e.to_string()))?;
        AnonymousMatcher::with_pattern(&self.flatten.anonymous_pattern)
            .map_err(|e| PipelineError::config("flatten.anonymous_pattern", e.to_string()))?;
        for (label, ns) in &self.prefixes {
            PrefixMap::new()
                .insert(label, ns)
                .map_err(|e| PipelineError::config("prefixes", e.to_string()))?;
        }
        Ok(())
    }

    /// Hex SHA-256 of the JSON serialization.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn cv_settings(&self) -> CvSettings {
        CvSettings {
            k: self.folds,
            seed: self.seed,
            embed: self.embed.clone(),
            operator: self.operator,
            threshold: self.threshold,
        }
    }

    pub fn prefix_map(&self) -> Result<PrefixMap, PipelineError> {
        let mut map = match &self.prefix_file {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(io_err(path))?;
                PrefixMap::from_json(&text).map_err(|source| PipelineError::Rdf {
                    path: path.clone(),
                    source,
                })?
            }
            None => PrefixMap::new(),
        };
        for (label, ns) in &self.prefixes {
            map.insert(label, ns)
                .map_err(|e| PipelineError::config("prefixes", e.to_string()))?;
        }
        Ok(map)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileReport {
    pub path: PathBuf,
    pub lines: u64,
    pub inserted: u64,
    pub duplicates: u64,
    pub errors: u64,
}

/// Reads every input file into one graph, then applies the schemas.
pub fn load_graph(config: &PipelineConfig) -> Result<(KnowledgeGraph, Vec<FileReport>), PipelineError> {
    let prefixes = config.prefix_map()?;
    let mut kg = KnowledgeGraph::new(config.mode);
    let mut reports = Vec::new();
    for path in &config.triples {
        let file = File::open(path).map_err(io_err(path))?;
        let report = ingest_document(BufReader::new(file), &prefixes, &mut kg).map_err(|source| PipelineError::Rdf {
            path: path.clone(),
            source,
        })?;
        for (line, column, message) in &report.errors {
            log::warn!("{}:{line}:{column}: {message}", path.display());
        }
        reports.push(FileReport {
            path: path.clone(),
            lines: report.summary.lines,
            inserted: report.inserted,
            duplicates: report.duplicates,
            errors: report.errors.len() as u64,
        });
    }
    for path in &config.tsv {
        let file = File::open(path).map_err(io_err(path))?;
        let inserted = read_tsv_edges(BufReader::new(file), &mut kg).map_err(|source| PipelineError::Rdf {
            path: path.clone(),
            source,
        })?;
        reports.push(FileReport {
            path: path.clone(),
            inserted,
            ..FileReport::default()
        });
    }
    Ok((kg, reports))
}

/// Collapses reified assertions, declares schemas and infers entity types.
pub fn prepare_graph(kg: &KnowledgeGraph, config: &PipelineConfig) -> Result<KnowledgeGraph, PipelineError> {
    let matcher = AnonymousMatcher::with_pattern(&config.flatten.anonymous_pattern)
        .map_err(|e| PipelineError::config("flatten.anonymous_pattern", e.to_string()))?
        .structural_fallback(config.flatten.structural_fallback);
    let flatten = FlattenConfig {
        matcher,
        ..FlattenConfig::default()
    };
    let mut flat = collapse_anonymous_instances(kg, &flatten)?;
    for decl in &config.schemas {
        let id = resolve_relation(&flat, &decl.relation).ok_or_else(|| PipelineError::UnknownRelation(decl.relation.clone()))?;
        let iri = flat.relation_iri(id).clone();
        flat.declare_schema(&iri, &decl.domain, &decl.range)?;
    }
    flat.infer_entity_types()?;
    Ok(flat)
}

/// Finds a relation by IRI, or by a local name that ends exactly one
/// relation IRI after `/` or `#`.
pub fn resolve_relation(kg: &KnowledgeGraph, name: &str) -> Option<RelationId> {
    if let Some(id) = kg.relation_id(name) {
        return Some(id);
    }
    let mut hits = kg.relation_ids().filter(|&r| {
        let iri = kg.relation_iri(r).as_str();
        iri.strip_suffix(name)
            .is_some_and(|head| head.ends_with('/') || head.ends_with('#'))
    });
    match (hits.next(), hits.next()) {
        (Some(r), None) => Some(r),
        _ => None,
    }
}

fn selected_relations(kg: &KnowledgeGraph, config: &PipelineConfig) -> Result<Vec<RelationId>, PipelineError> {
    if config.relations.is_empty() {
        return Ok(kg
            .relation_ids()
            .filter(|&r| kg.relation_iri(r).as_str() != RDF_TYPE && !kg.edges(r).is_empty())
            .collect());
    }
    config
        .relations
        .iter()
        .map(|name| resolve_relation(kg, name).ok_or_else(|| PipelineError::UnknownRelation(name.clone())))
        .collect()
}

fn slug(kg: &KnowledgeGraph, r: RelationId) -> String {
    let iri = kg.relation_iri(r).as_str();
    let local = iri.rsplit(['/', '#']).find(|s| !s.is_empty()).unwrap_or(iri);
    let clean: String = local
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect();
    format!("{:02}-{clean}", r.0)
}

/// Splits of every selected relation, in relation then fold order.
fn make_splits(
    kg: &KnowledgeGraph,
    relations: &[RelationId],
    config: &PipelineConfig,
) -> Result<Vec<EvaluationSplit>, PipelineError> {
    let settings = config.cv_settings();
    if !config.split_files.is_empty() {
        let mut splits = Vec::new();
        for path in &config.split_files {
            let file = File::open(path).map_err(io_err(path))?;
            let split = read_split(kg, BufReader::new(file)).map_err(|source| PipelineError::SplitFile {
                path: path.clone(),
                source,
            })?;
            splits.push(split);
        }
        let order = |r: RelationId| relations.iter().position(|&x| x == r).unwrap_or(usize::MAX);
        splits.sort_by_key(|s| (order(s.relation), s.fold));
        return Ok(splits);
    }
    let mut splits = Vec::new();
    for &r in relations {
        let plan = cv::fold_plan(kg, r, &settings)?;
        let name = kg.relation_iri(r).as_str();
        for fold in 0..plan.k {
            splits.push(build_split(kg, &plan, fold, settings.split_seed(name, fold)).map_err(CvError::from)?);
        }
    }
    Ok(splits)
}

/// Training edges for shared embeddings: every edge outside the test
/// positives of all splits with that fold index.
fn shared_training_edges(kg: &KnowledgeGraph, splits: &[EvaluationSplit]) -> BTreeMap<usize, Vec<Pair>> {
    let mut held_out: BTreeMap<usize, HashSet<Pair>> = BTreeMap::new();
    for s in splits {
        held_out.entry(s.fold).or_default().extend(s.test_pos.iter().copied());
    }
    held_out
        .into_iter()
        .map(|(fold, held)| {
            let mut seen = HashSet::new();
            let edges = kg
                .relation_ids()
                .flat_map(|r| kg.edges(r).iter().copied())
                .filter(|p| !held.contains(p) && seen.insert(*p))
                .collect();
            (fold, edges)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub baseline_f_measure: f64,
    pub baseline_roc_auc: f64,
    pub f_measure: String,
    pub roc_auc: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationResult {
    pub relation: String,
    pub dim: usize,
    pub folds: usize,
    pub f_measure: Summary,
    pub roc_auc: Summary,
    pub delta: Option<Delta>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    /// False when embeddings were shared across relations.
    pub faithful: bool,
    pub embedding_mode: String,
    pub classifier: ClassifierKind,
    pub precision: Precision,
    pub seed: u64,
    pub entities: usize,
    pub relation_counts: BTreeMap<String, usize>,
    pub inputs: Vec<FileReport>,
    pub results: Vec<RelationResult>,
    pub embedding_seconds: f64,
    pub wall_clock_seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineRun {
    pub rows: Vec<MetricRow>,
    pub summary: RunSummary,
}

#[derive(Serialize)]
struct StageRecord {
    stage: &'static str,
    inputs: Vec<String>,
    outputs: Vec<String>,
}

#[derive(Serialize)]
struct Manifest {
    config_hash: String,
    stages: Vec<StageRecord>,
}

/// Runs the whole protocol and writes the report files to `config.out`.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineRun, PipelineError> {
    config.validate()?;
    match config.precision {
        Precision::F32 => run_typed::<f32>(config),
        Precision::F64 => run_typed::<f64>(config),
    }
}

fn write_file(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), PipelineError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    write(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
}

fn run_typed<T: Scalar>(config: &PipelineConfig) -> Result<PipelineRun, PipelineError> {
    let start = Instant::now();
    let out = &config.out;
    fs::create_dir_all(out.join("splits")).map_err(io_err(out))?;
    let config_hash = config.hash();
    write_file(&out.join("effective-config.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, config)?;
        writeln!(w)
    })?;

    let (raw, inputs) = load_graph(config)?;
    let kg = prepare_graph(&raw, config)?;
    write_file(&out.join("graph.snapshot"), |w| {
        write_snapshot(&kg, w).map_err(|e| std::io::Error::other(e.to_string()))
    })?;
    let relations = selected_relations(&kg, config)?;
    log::info!(
        "graph: {} entities, {} edges, evaluating {} relation(s)",
        kg.num_entities(),
        kg.num_edges(),
        relations.len()
    );

    let splits = make_splits(&kg, &relations, config)?;
    let mut split_names = Vec::new();
    for s in &splits {
        let name = format!("splits/{}-fold{}.tsv", slug(&kg, s.relation), s.fold);
        write_file(&out.join(&name), |w| write_split(&kg, s, w))?;
        split_names.push(name);
    }

    // every split is audited before any classifier trains
    let shared = config.shared_embeddings.then(|| shared_training_edges(&kg, &splits));
    for s in &splits {
        let edges = match &shared {
            Some(by_fold) => by_fold[&s.fold].clone(),
            None => crate::split::embedding_training_edges(&kg, s),
        };
        cv::ensure_clean(&kg, s, &edges)?;
    }

    let classifier: Box<dyn FoldClassifier<T>> = match config.classifier.kind {
        ClassifierKind::Logreg => Box::new(LogregClassifier(config.classifier.logreg.clone())),
        ClassifierKind::Mlp => Box::new(MlpClassifier(config.classifier.mlp.clone())),
    };
    let settings = config.cv_settings();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| PipelineError::config("threads", e.to_string()))?;

    let (rows, embedding_seconds) = pool.install(|| -> Result<(Vec<MetricRow>, f64), PipelineError> {
        match &shared {
            None => {
                let tasks: Vec<(&EvaluationSplit, usize)> = splits
                    .iter()
                    .flat_map(|s| config.dims.iter().map(move |&d| (s, d)))
                    .collect();
                let outcomes = tasks
                    .par_iter()
                    .map(|&(s, dim)| cv::evaluate_split(&kg, s, dim, classifier.as_ref(), &settings))
                    .collect::<Result<Vec<_>, _>>()?;
                let seconds = outcomes
                    .iter()
                    .filter_map(|o| o.embedding.as_ref())
                    .map(|r| r.wall_clock_seconds)
                    .sum();
                Ok((outcomes.into_iter().map(|o| o.row).collect(), seconds))
            }
            Some(by_fold) => {
                let keys: Vec<(usize, usize)> = by_fold
                    .keys()
                    .flat_map(|&f| config.dims.iter().map(move |&d| (f, d)))
                    .collect();
                let trained = keys
                    .par_iter()
                    .map(|&(fold, dim)| {
                        let cfg = TrainConfig {
                            dim,
                            seed: derive_seed(config.seed, &format!("shared-embed/{fold}/{dim}")),
                            ..config.embed.clone()
                        };
                        embed::train::<T>(kg.num_entities(), &by_fold[&fold], &cfg).map(|(m, r)| ((fold, dim), (m, r)))
                    })
                    .collect::<Result<BTreeMap<_, _>, _>>()
                    .map_err(CvError::from)?;
                let tasks: Vec<(&EvaluationSplit, usize)> = splits
                    .iter()
                    .flat_map(|s| config.dims.iter().map(move |&d| (s, d)))
                    .collect();
                let rows = tasks
                    .par_iter()
                    .map(|&(s, dim)| {
                        let name = kg.relation_iri(s.relation).as_str();
                        let data = FoldData {
                            kg: &kg,
                            split: s,
                            embeddings: &trained[&(s.fold, dim)].0,
                            operator: config.operator,
                            seed: settings.classifier_seed(name, s.fold, dim),
                        };
                        cv::score_split(&data, classifier.as_ref(), config.threshold).map(|o| o.row)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok((rows, trained.values().map(|(_, r)| r.wall_clock_seconds).sum()))
            }
        }
    })?;

    let mut rows = rows;
    let order = |name: &str| relations.iter().position(|&r| kg.relation_iri(r).as_str() == name);
    rows.sort_by(|a, b| (order(&a.relation), a.dim, a.fold).cmp(&(order(&b.relation), b.dim, b.fold)));
    write_file(&out.join("metrics.csv"), |w| write_metrics_csv(&rows, w))?;

    let baseline = match &config.baseline {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            BaselineTable::from_csv(&text).map_err(|e| PipelineError::config("baseline", e.to_string()))?
        }
        None => BaselineTable::sota(),
    };
    let results = aggregate(&rows, &baseline);
    let known: Vec<MetricRow> = rows.iter().filter(|r| baseline.get(&r.relation).is_some()).cloned().collect();
    let deltas = crate::metrics::delta_report(&known, &baseline).expect("rows filtered to known relations");
    write_file(&out.join("deltas.txt"), |w| w.write_all(crate::metrics::render_delta_table(&deltas).as_bytes()))?;

    let summary = RunSummary {
        config_hash: config_hash.clone(),
        faithful: !config.shared_embeddings,
        embedding_mode: if config.shared_embeddings { "shared" } else { "per-fold" }.into(),
        classifier: config.classifier.kind,
        precision: config.precision,
        seed: config.seed,
        entities: kg.num_entities(),
        relation_counts: kg.relation_stats(),
        inputs,
        results,
        embedding_seconds,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    write_file(&out.join("summary.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &summary)?;
        writeln!(w)
    })?;

    let input_names: Vec<String> = config
        .triples
        .iter()
        .chain(&config.tsv)
        .map(|p| p.display().to_string())
        .collect();
    let manifest = Manifest {
        config_hash,
        stages: vec![
            StageRecord {
                stage: "ingest+flatten",
                inputs: input_names,
                outputs: vec!["graph.snapshot".into()],
            },
            StageRecord {
                stage: "split",
                inputs: std::iter::once("graph.snapshot".to_owned())
                    .chain(config.split_files.iter().map(|p| p.display().to_string()))
                    .collect(),
                outputs: split_names.clone(),
            },
            StageRecord {
                stage: "embed+classify",
                inputs: std::iter::once("graph.snapshot".to_owned()).chain(split_names).collect(),
                outputs: vec!["metrics.csv".into()],
            },
            StageRecord {
                stage: "report",
                inputs: vec!["metrics.csv".into()],
                outputs: vec!["summary.json".into(), "deltas.txt".into()],
            },
        ],
    };
    write_file(&out.join("manifest.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest)?;
        writeln!(w)
    })?;
    Ok(PipelineRun { rows, summary })
}

/// Mean and std per `(relation, dim)`, with deltas where a baseline exists.
pub fn aggregate(rows: &[MetricRow], baseline: &BaselineTable) -> Vec<RelationResult> {
    let mut groups: Vec<((String, usize), Vec<&MetricRow>)> = Vec::new();
    for r in rows {
        let key = (r.relation.clone(), r.dim);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, g)) => g.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|((relation, dim), g)| {
            let f = crate::metrics::summarize(&g.iter().map(|r| r.f_measure).collect::<Vec<_>>());
            let auc = crate::metrics::summarize(&g.iter().map(|r| r.roc_auc).collect::<Vec<_>>());
            let delta = baseline.get(&relation).map(|(bf, bauc)| Delta {
                baseline_f_measure: bf,
                baseline_roc_auc: bauc,
                f_measure: format_delta(f.mean - bf),
                roc_auc: format_delta(auc.mean - bauc),
            });
            RelationResult {
                relation,
                dim,
                folds: g.len(),
                f_measure: f,
                roc_auc: auc,
                delta,
            }
        })
        .collect()
}
