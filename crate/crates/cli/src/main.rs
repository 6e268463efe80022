//! `kglp`: knowledge-graph link prediction from the command line.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kglp_core::embed::{self, EmbeddingMatrix, TrainConfig};
use kglp_core::kg::{self, AmbiguityMode, KnowledgeGraph};
use kglp_core::metrics::{self, BaselineTable, FoldData, ScoredExample};
use kglp_core::model::{self, LogregConfig, MlpConfig, ModelFile, PairOperator};
use kglp_core::pipeline::{self, ClassifierKind, PipelineConfig, PipelineError};
use kglp_core::rdf::PrefixMap;
use kglp_core::split::{self, Role};
use kglp_core::synth;

#[derive(Parser)]
#[command(name = "kglp", version, about = "Link prediction on knowledge graphs with log-linear embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse triples into a graph snapshot.
    Ingest(IngestArgs),
    /// Collapse reified assertions into direct edges.
    Flatten(FlattenArgs),
    /// Print edge counts per relation.
    Stats(StatsArgs),
    /// Write k-fold evaluation splits for one relation.
    Split(SplitArgs),
    /// Train entity embeddings.
    Embed(EmbedArgs),
    /// Train a link classifier on one split and score its test pairs.
    Classify(ClassifyArgs),
    /// Run the full cross-validated pipeline.
    Evaluate(EvaluateArgs),
    /// Render deltas of a metrics CSV against the baseline table.
    Report(ReportArgs),
    /// Generate a synthetic graph.
    Synth(SynthArgs),
}

#[derive(Args, Clone)]
struct InputArgs {
    /// N-Triples or prefixed-name document.
    #[arg(long = "triples", value_name = "PATH")]
    triples: Vec<PathBuf>,
    /// `relation<TAB>subject<TAB>object` edge list.
    #[arg(long = "tsv", value_name = "PATH")]
    tsv: Vec<PathBuf>,
    /// Prefix binding `LABEL=IRI`.
    #[arg(long = "prefix", value_name = "LABEL=IRI")]
    prefix: Vec<String>,
    /// JSON prefix file.
    #[arg(long = "prefix-file", value_name = "PATH")]
    prefix_file: Option<PathBuf>,
    /// Reject a pair asserted under two relations (default).
    #[arg(long, conflicts_with = "lenient")]
    strict: bool,
    /// Record pairs asserted under two relations instead of failing.
    #[arg(long)]
    lenient: bool,
}

impl InputArgs {
    fn mode(&self) -> Option<AmbiguityMode> {
        match (self.strict, self.lenient) {
            (_, true) => Some(AmbiguityMode::Lenient),
            (true, _) => Some(AmbiguityMode::Strict),
            _ => None,
        }
    }

    fn to_config(&self) -> Result<PipelineConfig, CliError> {
        let mut cfg = PipelineConfig {
            triples: self.triples.clone(),
            tsv: self.tsv.clone(),
            prefix_file: self.prefix_file.clone(),
            mode: self.mode().unwrap_or_default(),
            ..PipelineConfig::default()
        };
        apply_prefixes(&mut cfg, &self.prefix)?;
        Ok(cfg)
    }
}

fn apply_prefixes(cfg: &mut PipelineConfig, flags: &[String]) -> Result<(), CliError> {
    for flag in flags {
        let mut probe = PrefixMap::new();
        probe.insert_flag(flag).map_err(|e| CliError::config(e.code(), e))?;
        for (label, ns) in probe.iter() {
            cfg.prefixes.insert(label.to_owned(), ns.to_owned());
        }
    }
    Ok(())
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Snapshot to write.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

#[derive(Args)]
struct FlattenArgs {
    /// Snapshot to read.
    #[arg(long, value_name = "PATH")]
    graph: PathBuf,
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// Regex identifying anonymous instance nodes.
    #[arg(long, default_value = "instance_[0-9]+$")]
    anonymous_pattern: String,
    /// Also detect anonymous nodes by their edge pattern.
    #[arg(long)]
    structural: bool,
}

#[derive(Args)]
struct StatsArgs {
    /// Snapshot to read; alternatively give input files.
    #[arg(long, value_name = "PATH")]
    graph: Option<PathBuf>,
    #[command(flatten)]
    input: InputArgs,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long, value_name = "PATH")]
    graph: PathBuf,
    #[arg(long, value_name = "NAME")]
    relation: String,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, env = "KGLP_SEED", default_value_t = 0)]
    seed: u64,
    /// Directory receiving one file per fold.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum EmbeddingFormat {
    Text,
    Binary,
}

#[derive(Args)]
struct EmbedArgs {
    /// Snapshot to read; alternatively give input files.
    #[arg(long, value_name = "PATH")]
    graph: Option<PathBuf>,
    #[command(flatten)]
    input: InputArgs,
    /// Train on every edge outside this split's test positives.
    #[arg(long, value_name = "PATH")]
    split: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    dim: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    learning_rate: f64,
    #[arg(long, default_value_t = 10)]
    negatives: usize,
    #[arg(long, env = "KGLP_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, value_enum, default_value_t = EmbeddingFormat::Text)]
    format: EmbeddingFormat,
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// Training report JSON; printed to stdout when absent.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long, value_name = "PATH")]
    graph: PathBuf,
    #[arg(long, value_name = "PATH")]
    split: PathBuf,
    /// Text embeddings written by `embed`.
    #[arg(long, value_name = "PATH")]
    embeddings: PathBuf,
    #[arg(long, value_enum, default_value_t = ClassifierArg::Logreg)]
    classifier: ClassifierArg,
    /// Hidden layer widths for the MLP.
    #[arg(long, value_delimiter = ',', value_name = "CSV-INTS")]
    hidden: Option<Vec<usize>>,
    #[arg(long, env = "KGLP_SEED", default_value_t = 0)]
    seed: u64,
    /// Model JSON to write.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// Per-pair test scores as TSV.
    #[arg(long, value_name = "PATH")]
    scores: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassifierArg {
    Logreg,
    Mlp,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, env = "KGLP_SEED")]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',', value_name = "CSV-INTS")]
    dims: Option<Vec<usize>>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long = "relation", value_name = "NAME")]
    relation: Vec<String>,
    #[arg(long, value_enum)]
    classifier: Option<ClassifierArg>,
    #[arg(long, value_delimiter = ',', value_name = "CSV-INTS")]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Pre-built split file; repeatable.
    #[arg(long = "split-file", value_name = "PATH")]
    split_file: Vec<PathBuf>,
    /// Share embeddings across relations (faster, not faithful to the protocol).
    #[arg(long)]
    shared_embeddings: bool,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, value_name = "PATH")]
    metrics: PathBuf,
    /// Baseline CSV `relation,f_measure,roc_auc`; defaults to the bundled table.
    #[arg(long, value_name = "PATH")]
    baseline: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    /// Bipartite latent-factor relation.
    Latent,
    /// Strictly asymmetric relation over one entity type.
    Directed,
    /// Uniformly random directed edges.
    Random,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: SynthKind,
    /// Entities per side (latent), nodes (directed, random).
    #[arg(long, default_value_t = 200)]
    entities: usize,
    /// Edge count for `random`.
    #[arg(long, default_value_t = 100_000)]
    edges: usize,
    #[arg(long, default_value_t = 5)]
    rank: usize,
    #[arg(long, default_value_t = 0.05)]
    fraction: f64,
    #[arg(long, env = "KGLP_SEED", default_value_t = 0)]
    seed: u64,
    /// N-Triples output.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

struct CliError {
    code: &'static str,
    exit: u8,
    message: String,
}

impl CliError {
    fn config(code: &'static str, e: impl std::fmt::Display) -> Self {
        CliError {
            code,
            exit: 2,
            message: e.to_string(),
        }
    }

    fn data(code: &'static str, e: impl std::fmt::Display) -> Self {
        CliError {
            code,
            exit: 3,
            message: e.to_string(),
        }
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::data(e.code(), e)
            }
        }
    )*};
}

data_error!(kg::KgError, embed::EmbedError, model::ModelError, split::SplitError, metrics::MetricError, metrics::CvError);

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError {
            code: e.code(),
            exit: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

fn io_error(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |e| CliError::data("io", format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_error(parent))?;
    }
    File::create(path).map(BufWriter::new).map_err(io_error(path))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(io_error(path))
}

fn read_graph(path: &Path) -> Result<KnowledgeGraph, CliError> {
    Ok(kg::read_snapshot(open(path)?)?)
}

fn write_graph(kg: &KnowledgeGraph, path: &Path) -> Result<(), CliError> {
    let mut w = create(path)?;
    kg::write_snapshot(kg, &mut w)?;
    w.flush().map_err(io_error(path))
}

fn graph_from(graph: Option<&Path>, input: &InputArgs) -> Result<KnowledgeGraph, CliError> {
    match graph {
        Some(path) => read_graph(path),
        None => {
            let cfg = input.to_config()?;
            if cfg.triples.is_empty() && cfg.tsv.is_empty() {
                return Err(CliError::config("cli/usage", "give --graph or at least one --triples/--tsv input"));
            }
            Ok(pipeline::load_graph(&cfg)?.0)
        }
    }
}

fn relation(kg: &KnowledgeGraph, name: &str) -> Result<kg::RelationId, CliError> {
    pipeline::resolve_relation(kg, name)
        .ok_or_else(|| CliError::data("kg/unknown-relation", format!("relation {name} is not in the graph")))
}

fn ingest(args: IngestArgs) -> Result<(), CliError> {
    let cfg = args.input.to_config()?;
    if cfg.triples.is_empty() && cfg.tsv.is_empty() {
        return Err(CliError::config("cli/usage", "no input files given"));
    }
    let (kg, reports) = pipeline::load_graph(&cfg)?;
    write_graph(&kg, &args.out)?;
    for r in &reports {
        println!(
            "{}\tlines={}\tinserted={}\tduplicates={}\terrors={}",
            r.path.display(),
            r.lines,
            r.inserted,
            r.duplicates,
            r.errors
        );
    }
    println!("entities={}\tedges={}", kg.num_entities(), kg.num_edges());
    Ok(())
}

fn flatten(args: FlattenArgs) -> Result<(), CliError> {
    let raw = read_graph(&args.graph)?;
    let matcher = kg::AnonymousMatcher::with_pattern(&args.anonymous_pattern)
        .map_err(|e| CliError::config("cli/anonymous-pattern", e))?
        .structural_fallback(args.structural);
    let config = kg::FlattenConfig {
        matcher,
        ..kg::FlattenConfig::default()
    };
    let flat = kg::collapse_anonymous_instances(&raw, &config)?;
    write_graph(&flat, &args.out)?;
    println!(
        "entities {} -> {}\tedges {} -> {}",
        raw.num_entities(),
        flat.num_entities(),
        raw.num_edges(),
        flat.num_edges()
    );
    Ok(())
}

fn stats(args: StatsArgs) -> Result<(), CliError> {
    let kg = graph_from(args.graph.as_deref(), &args.input)?;
    let counts = kg.relation_stats();
    if args.json {
        println!("{}", serde_json::to_string_pretty(&counts).expect("map serializes"));
        return Ok(());
    }
    let width = counts.keys().map(String::len).max().unwrap_or(8);
    for (rel, n) in &counts {
        println!("{rel:width$}\t{n}");
    }
    let ambiguous = kg.verify_flattening_safety();
    if !ambiguous.is_empty() {
        eprintln!("warning: {} pair(s) appear under several relations", ambiguous.len());
    }
    Ok(())
}

fn split_cmd(args: SplitArgs) -> Result<(), CliError> {
    let kg = read_graph(&args.graph)?;
    let r = relation(&kg, &args.relation)?;
    let settings = metrics::CvSettings {
        k: args.folds,
        seed: args.seed,
        ..metrics::CvSettings::default()
    };
    let plan = metrics::cv::fold_plan(&kg, r, &settings)?;
    let name = kg.relation_iri(r).as_str().to_owned();
    fs::create_dir_all(&args.out).map_err(io_error(&args.out))?;
    let local = name.rsplit(['/', '#']).next().unwrap_or("relation").to_owned();
    for fold in 0..plan.k {
        let s = split::build_split(&kg, &plan, fold, settings.split_seed(&name, fold))?;
        let path = args.out.join(format!("{local}-fold{fold}.tsv"));
        let mut w = create(&path)?;
        split::write_split(&kg, &s, &mut w).map_err(io_error(&path))?;
        println!(
            "{}\ttrain_pos={}\ttest_pos={}\ttrain_neg={}\ttest_neg={}",
            path.display(),
            s.train_pos.len(),
            s.test_pos.len(),
            s.train_neg.len(),
            s.test_neg.len()
        );
    }
    Ok(())
}

fn embed_cmd(args: EmbedArgs) -> Result<(), CliError> {
    let kg = graph_from(args.graph.as_deref(), &args.input)?;
    let edges: Vec<kg::Pair> = match &args.split {
        Some(path) => {
            let s = split::read_split(&kg, open(path)?)?;
            split::embedding_training_edges(&kg, &s)
        }
        None => {
            let mut seen = std::collections::HashSet::new();
            kg.pairs().filter(|p| seen.insert(*p)).collect()
        }
    };
    let config = TrainConfig {
        dim: args.dim,
        epochs: args.epochs,
        learning_rate: args.learning_rate,
        negatives_per_positive: args.negatives,
        seed: args.seed,
        threads: args.threads,
        ..TrainConfig::default()
    };
    config.validate().map_err(|e| CliError::config(e.code(), e))?;
    let (m, report) = embed::train::<f32>(kg.num_entities(), &edges, &config)?;
    let mut w = create(&args.out)?;
    match args.format {
        EmbeddingFormat::Text => embed::write_text(&m, kg.entities().names(), &mut w)?,
        EmbeddingFormat::Binary => embed::write_binary(&m, &mut w)?,
    }
    w.flush().map_err(io_error(&args.out))?;
    let json = serde_json::json!({
        "edges": edges.len(),
        "entities": kg.num_entities(),
        "config": config,
        "epoch_losses": report.epoch_losses,
        "examples_processed": report.examples_processed,
        "wall_clock_seconds": report.wall_clock_seconds,
    });
    let text = serde_json::to_string_pretty(&json).expect("report serializes");
    match &args.report {
        Some(path) => fs::write(path, text + "\n").map_err(io_error(path))?,
        None => println!("{text}"),
    }
    Ok(())
}

/// Reorders loaded rows to the graph's entity ids.
fn align_embeddings(kg: &KnowledgeGraph, names: &[kg::Iri], m: EmbeddingMatrix<f32>) -> Result<EmbeddingMatrix<f32>, CliError> {
    let mut out = EmbeddingMatrix::zeros(kg.num_entities(), m.dim());
    let mut seen = vec![false; kg.num_entities()];
    for (row, name) in names.iter().enumerate() {
        if let Some(e) = kg.entity_id(name.as_str()) {
            out.row_mut(e.index()).copy_from_slice(m.row(row));
            seen[e.index()] = true;
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(CliError::data(
            "embed/missing-entity",
            format!("no embedding for {}", kg.entity_iri(kg::EntityId(missing as u32))),
        ));
    }
    Ok(out)
}

fn classify(args: ClassifyArgs) -> Result<(), CliError> {
    let kg = read_graph(&args.graph)?;
    let s = split::read_split(&kg, open(&args.split)?)?;
    let (names, raw) = embed::read_text::<f32, _>(open(&args.embeddings)?)?;
    let embeddings = align_embeddings(&kg, &names, raw)?;
    let data = FoldData {
        kg: &kg,
        split: &s,
        embeddings: &embeddings,
        operator: PairOperator::Concat,
        seed: args.seed,
    };
    let (x, y) = data.training_set()?;
    let file = match args.classifier {
        ClassifierArg::Logreg => {
            let config = LogregConfig::default();
            let model = model::train_logreg(&x, &y, &config)?;
            ModelFile::Logreg { config, model }
        }
        ClassifierArg::Mlp => {
            let mut config = MlpConfig {
                seed: args.seed,
                ..MlpConfig::default()
            };
            if let Some(hidden) = &args.hidden {
                config.hidden = hidden.clone();
            }
            let model = model::train_mlp(&x, &y, &config)?;
            ModelFile::Mlp { config, model }
        }
    };
    let mut w = create(&args.out)?;
    serde_json::to_writer(&mut w, &file).map_err(|e| CliError::data("model/io", e))?;
    w.flush().map_err(io_error(&args.out))?;

    let test = data.test_features()?;
    let probs = test
        .iter()
        .map(|f| file.classifier().predict_proba(f))
        .collect::<Result<Vec<f32>, _>>()?;
    let scored: Vec<ScoredExample<f32>> = probs.iter().zip(data.test_labels()).map(|(&p, l)| ScoredExample::new(p, l)).collect();
    if let Some(path) = &args.scores {
        let mut w = create(path)?;
        let pairs = s.role(Role::TestPos).iter().chain(s.role(Role::TestNeg));
        for ((subject, object), e) in pairs.zip(&scored) {
            writeln!(w, "{}\t{}\t{}\t{}", kg.entity_iri(*subject), kg.entity_iri(*object), u8::from(e.label), e.score)
                .map_err(io_error(path))?;
        }
        w.flush().map_err(io_error(path))?;
    }
    println!(
        "f_measure={:.6}\troc_auc={:.6}",
        metrics::f_measure(&scored, 0.5)?,
        metrics::roc_auc(&scored)?
    );
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let mut cfg = match &args.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    cfg.triples.extend(args.input.triples.iter().cloned());
    cfg.tsv.extend(args.input.tsv.iter().cloned());
    if let Some(p) = &args.input.prefix_file {
        cfg.prefix_file = Some(p.clone());
    }
    apply_prefixes(&mut cfg, &args.input.prefix)?;
    if let Some(mode) = args.input.mode() {
        cfg.mode = mode;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(dims) = args.dims {
        cfg.dims = dims;
    }
    if let Some(k) = args.folds {
        cfg.folds = k;
    }
    if !args.relation.is_empty() {
        cfg.relations = args.relation;
    }
    if let Some(c) = args.classifier {
        cfg.classifier.kind = match c {
            ClassifierArg::Logreg => ClassifierKind::Logreg,
            ClassifierArg::Mlp => ClassifierKind::Mlp,
        };
    }
    if let Some(hidden) = args.hidden {
        cfg.classifier.mlp.hidden = hidden;
    }
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    if let Some(e) = args.epochs {
        cfg.embed.epochs = e;
    }
    if !args.split_file.is_empty() {
        cfg.split_files = args.split_file;
    }
    if args.shared_embeddings {
        cfg.shared_embeddings = true;
    }
    if let Some(out) = args.out {
        cfg.out = out;
    }
    let run = pipeline::run_pipeline(&cfg)?;
    for r in &run.summary.results {
        let delta = r
            .delta
            .as_ref()
            .map(|d| format!("\tdF={}\tdAUC={}", d.f_measure, d.roc_auc))
            .unwrap_or_default();
        println!(
            "{}\td={}\tF={:.3}±{:.3}\tAUC={:.3}±{:.3}{delta}",
            r.relation, r.dim, r.f_measure.mean, r.f_measure.std, r.roc_auc.mean, r.roc_auc.std
        );
    }
    if !run.summary.faithful {
        println!("note: embeddings shared across relations; results are not faithful to the per-fold protocol");
    }
    println!("reports written to {}", cfg.out.display());
    Ok(())
}

fn report(args: ReportArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.metrics).map_err(io_error(&args.metrics))?;
    let rows = metrics::read_metrics_csv(&text)?;
    let baseline = match &args.baseline {
        Some(path) => BaselineTable::from_csv(&fs::read_to_string(path).map_err(io_error(path))?)?,
        None => BaselineTable::sota(),
    };
    let deltas = metrics::delta_report(&rows, &baseline)?;
    print!("{}", metrics::render_delta_table(&deltas));
    Ok(())
}

fn synth_cmd(args: SynthArgs) -> Result<(), CliError> {
    let triples = match args.kind {
        SynthKind::Latent => synth::LatentFactorSpec {
            domain: args.entities,
            range: args.entities,
            rank: args.rank,
            positive_fraction: args.fraction,
            seed: args.seed,
        }
        .triples(),
        SynthKind::Directed => {
            let kg = synth::DirectedFactorSpec {
                nodes: args.entities,
                rank: args.rank,
                positive_fraction: args.fraction,
                seed: args.seed,
            }
            .graph();
            kg.triples().collect()
        }
        SynthKind::Random => {
            if args.entities < 2 || args.edges > args.entities * (args.entities - 1) {
                return Err(CliError::config("cli/usage", "too many edges for the entity count"));
            }
            let rel = format!("{}random", synth::SYNTH_NS);
            synth::random_edges(args.entities, args.edges, args.seed)
                .into_iter()
                .map(|(s, o)| {
                    kg::Triple::parse(
                        &format!("{}e{}", synth::SYNTH_NS, s.0),
                        &rel,
                        &format!("{}e{}", synth::SYNTH_NS, o.0),
                    )
                    .expect("valid IRIs")
                })
                .collect()
        }
    };
    let mut w = create(&args.out)?;
    for t in &triples {
        writeln!(w, "{}", kglp_core::rdf::serialize_triple(t)).map_err(io_error(&args.out))?;
    }
    w.flush().map_err(io_error(&args.out))?;
    println!("{} triples written to {}", triples.len(), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Flatten(a) => flatten(a),
        Command::Stats(a) => stats(a),
        Command::Split(a) => split_cmd(a),
        Command::Embed(a) => embed_cmd(a),
        Command::Classify(a) => classify(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Report(a) => report(a),
        Command::Synth(a) => synth_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.code, e.message);
            ExitCode::from(e.exit)
        }
    }
}
