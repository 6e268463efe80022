use std::collections::HashSet;

use thiserror::Error;

use super::{f_measure, roc_auc, summarize, MetricError, MetricRow, ScoredExample, Summary};
use crate::embed::{self, EmbedError, EmbeddingMatrix, TrainConfig, TrainReport};
use crate::kg::{KnowledgeGraph, Pair, RelationId};
use crate::model::{train_logreg, train_mlp, LinkClassifier, LogregConfig, MlpConfig, ModelError, PairOperator};
use crate::rng::derive_seed;
use crate::scalar::Scalar;
use crate::split::{audit_leakage, build_split, embedding_training_edges, make_folds, EvaluationSplit, FoldPlan, SplitError};

#[derive(Debug, Error)]
pub enum CvError {
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("leakage in {relation} fold {fold}: {}", violations.join("; "))]
    Leakage {
        relation: String,
        fold: usize,
        violations: Vec<String>,
    },
}

impl CvError {
    pub fn code(&self) -> &'static str {
        match self {
            CvError::Split(e) => e.code(),
            CvError::Embed(e) => e.code(),
            CvError::Model(e) => e.code(),
            CvError::Metric(e) => e.code(),
            CvError::Leakage { .. } => "split/leakage",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvSettings {
    pub k: usize,
    pub seed: u64,
    /// Embedding hyperparameters; `dim` and `seed` are set per run.
    pub embed: TrainConfig,
    pub operator: PairOperator,
    /// Decision threshold on predicted probabilities for the F-measure.
    pub threshold: f64,
}

impl Default for CvSettings {
    fn default() -> Self {
        CvSettings {
            k: 5,
            seed: 0,
            embed: TrainConfig::default(),
            operator: PairOperator::Concat,
            threshold: 0.5,
        }
    }
}

impl CvSettings {
    pub fn fold_seed(&self, relation: &str) -> u64 {
        derive_seed(self.seed, &format!("folds/{relation}"))
    }

    pub fn split_seed(&self, relation: &str, fold: usize) -> u64 {
        derive_seed(self.seed, &format!("split/{relation}/{fold}"))
    }

    pub fn embed_seed(&self, relation: &str, fold: usize, dim: usize) -> u64 {
        derive_seed(self.seed, &format!("embed/{relation}/{fold}/{dim}"))
    }

    pub fn classifier_seed(&self, relation: &str, fold: usize, dim: usize) -> u64 {
        derive_seed(self.seed, &format!("classifier/{relation}/{fold}/{dim}"))
    }
}

/// Everything a classifier sees for one fold.
pub struct FoldData<'a, T> {
    pub kg: &'a KnowledgeGraph,
    pub split: &'a EvaluationSplit,
    pub embeddings: &'a EmbeddingMatrix<T>,
    pub operator: PairOperator,
    pub seed: u64,
}

impl<T: Scalar> FoldData<'_, T> {
    pub fn feature(&self, (s, o): Pair) -> Result<Vec<T>, ModelError> {
        self.operator.apply(self.embeddings.entity(s), self.embeddings.entity(o))
    }

    /// Training features, positives first, with their labels.
    pub fn training_set(&self) -> Result<(Vec<Vec<T>>, Vec<bool>), ModelError> {
        labelled(self, &self.split.train_pos, &self.split.train_neg)
    }

    /// Test features in the order of [`FoldData::test_labels`].
    pub fn test_features(&self) -> Result<Vec<Vec<T>>, ModelError> {
        labelled(self, &self.split.test_pos, &self.split.test_neg).map(|(f, _)| f)
    }

    pub fn test_labels(&self) -> Vec<bool> {
        let mut labels = vec![true; self.split.test_pos.len()];
        labels.resize(labels.len() + self.split.test_neg.len(), false);
        labels
    }
}

fn labelled<T: Scalar>(data: &FoldData<'_, T>, pos: &[Pair], neg: &[Pair]) -> Result<(Vec<Vec<T>>, Vec<bool>), ModelError> {
    let mut features = Vec::with_capacity(pos.len() + neg.len());
    let mut labels = Vec::with_capacity(pos.len() + neg.len());
    for (pairs, label) in [(pos, true), (neg, false)] {
        for &p in pairs {
            features.push(data.feature(p)?);
            labels.push(label);
        }
    }
    Ok((features, labels))
}

/// A link classifier trained and applied within one fold.
pub trait FoldClassifier<T: Scalar>: Sync {
    fn name(&self) -> &str;

    /// Edge probabilities for the test pairs, positives first.
    fn fit_predict(&self, data: &FoldData<'_, T>) -> Result<Vec<T>, ModelError>;
}

fn predict_all<T: Scalar>(model: &dyn LinkClassifier<T>, features: &[Vec<T>]) -> Result<Vec<T>, ModelError> {
    features.iter().map(|f| model.predict_proba(f)).collect()
}

#[derive(Clone, Debug, Default)]
pub struct LogregClassifier(pub LogregConfig);

impl<T: Scalar> FoldClassifier<T> for LogregClassifier {
    fn name(&self) -> &str {
        "logreg"
    }

    fn fit_predict(&self, data: &FoldData<'_, T>) -> Result<Vec<T>, ModelError> {
        let (x, y) = data.training_set()?;
        let model = train_logreg(&x, &y, &self.0)?;
        predict_all(&model, &data.test_features()?)
    }
}

/// The configured seed is replaced by the fold's classifier seed.
#[derive(Clone, Debug, Default)]
pub struct MlpClassifier(pub MlpConfig);

impl<T: Scalar> FoldClassifier<T> for MlpClassifier {
    fn name(&self) -> &str {
        "mlp"
    }

    fn fit_predict(&self, data: &FoldData<'_, T>) -> Result<Vec<T>, ModelError> {
        let (x, y) = data.training_set()?;
        let config = MlpConfig {
            seed: data.seed,
            ..self.0.clone()
        };
        let model = train_mlp(&x, &y, &config)?;
        predict_all(&model, &data.test_features()?)
    }
}

#[derive(Clone, Debug)]
pub struct FoldOutcome<T> {
    pub row: MetricRow,
    pub scores: Vec<ScoredExample<T>>,
    pub embedding: Option<TrainReport>,
}

/// Scores a split with embeddings trained elsewhere.
pub fn score_split<T: Scalar>(
    data: &FoldData<'_, T>,
    classifier: &dyn FoldClassifier<T>,
    threshold: f64,
) -> Result<FoldOutcome<T>, CvError> {
    let probs = classifier.fit_predict(data)?;
    let scores: Vec<ScoredExample<T>> = probs
        .into_iter()
        .zip(data.test_labels())
        .map(|(p, l)| ScoredExample::new(p, l))
        .collect();
    let row = MetricRow {
        relation: data.kg.relation_iri(data.split.relation).as_str().to_owned(),
        dim: data.embeddings.dim(),
        fold: data.split.fold,
        f_measure: f_measure(&scores, T::of(threshold))?,
        roc_auc: roc_auc(&scores)?,
    };
    Ok(FoldOutcome {
        row,
        scores,
        embedding: None,
    })
}

/// Fails with [`CvError::Leakage`] if the split leaks into `training_edges`.
pub fn ensure_clean(kg: &KnowledgeGraph, split: &EvaluationSplit, training_edges: &[Pair]) -> Result<(), CvError> {
    let set: HashSet<Pair> = training_edges.iter().copied().collect();
    let violations = audit_leakage(kg, split, &set);
    if violations.is_empty() {
        return Ok(());
    }
    Err(CvError::Leakage {
        relation: kg.relation_iri(split.relation).as_str().to_owned(),
        fold: split.fold,
        violations: violations.iter().map(|v| v.describe(kg)).collect(),
    })
}

/// Audits the split, trains embeddings on every edge outside its test
/// positives, then fits and scores the classifier.
pub fn evaluate_split<T: Scalar>(
    kg: &KnowledgeGraph,
    split: &EvaluationSplit,
    dim: usize,
    classifier: &dyn FoldClassifier<T>,
    settings: &CvSettings,
) -> Result<FoldOutcome<T>, CvError> {
    let relation = kg.relation_iri(split.relation).as_str();
    let edges = embedding_training_edges(kg, split);
    ensure_clean(kg, split, &edges)?;
    let config = TrainConfig {
        dim,
        seed: settings.embed_seed(relation, split.fold, dim),
        ..settings.embed.clone()
    };
    let (embeddings, report) = embed::train::<T>(kg.num_entities(), &edges, &config)?;
    let data = FoldData {
        kg,
        split,
        embeddings: &embeddings,
        operator: settings.operator,
        seed: settings.classifier_seed(relation, split.fold, dim),
    };
    let mut outcome = score_split(&data, classifier, settings.threshold)?;
    outcome.embedding = Some(report);
    Ok(outcome)
}

pub fn fold_plan(kg: &KnowledgeGraph, relation: RelationId, settings: &CvSettings) -> Result<FoldPlan, CvError> {
    let name = kg.relation_iri(relation).as_str();
    Ok(make_folds(kg, relation, settings.k, settings.fold_seed(name))?)
}

/// Builds the split for `fold` of `plan` and evaluates it.
pub fn evaluate_fold<T: Scalar>(
    kg: &KnowledgeGraph,
    plan: &FoldPlan,
    fold: usize,
    dim: usize,
    classifier: &dyn FoldClassifier<T>,
    settings: &CvSettings,
) -> Result<FoldOutcome<T>, CvError> {
    let name = kg.relation_iri(plan.relation).as_str();
    let split = build_split(kg, plan, fold, settings.split_seed(name, fold))?;
    evaluate_split(kg, &split, dim, classifier, settings)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvReport {
    pub relation: String,
    pub dim: usize,
    pub classifier: String,
    pub rows: Vec<MetricRow>,
    pub f_measure: Summary,
    pub roc_auc: Summary,
}

impl CvReport {
    pub fn from_rows(relation: String, dim: usize, classifier: String, rows: Vec<MetricRow>) -> Self {
        let f: Vec<f64> = rows.iter().map(|r| r.f_measure).collect();
        let auc: Vec<f64> = rows.iter().map(|r| r.roc_auc).collect();
        CvReport {
            relation,
            dim,
            classifier,
            f_measure: summarize(&f),
            roc_auc: summarize(&auc),
            rows,
        }
    }
}

/// `k`-fold cross-validation of one relation at one embedding dimension.
pub fn cross_validate<T: Scalar>(
    kg: &KnowledgeGraph,
    relation: RelationId,
    dim: usize,
    classifier: &dyn FoldClassifier<T>,
    settings: &CvSettings,
) -> Result<CvReport, CvError> {
    let plan = fold_plan(kg, relation, settings)?;
    let rows = (0..settings.k)
        .map(|fold| evaluate_fold(kg, &plan, fold, dim, classifier, settings).map(|o| o.row))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CvReport::from_rows(
        kg.relation_iri(relation).as_str().to_owned(),
        dim,
        classifier.name().to_owned(),
        rows,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{AmbiguityMode, Triple};

    /// Scores 1 for real edges and 0 otherwise.
    struct Oracle;

    impl FoldClassifier<f64> for Oracle {
        fn name(&self) -> &str {
            "oracle"
        }

        fn fit_predict(&self, data: &FoldData<'_, f64>) -> Result<Vec<f64>, ModelError> {
            let r = data.split.relation;
            Ok(data
                .split
                .test_pos
                .iter()
                .chain(&data.split.test_neg)
                .map(|&p| if data.kg.has_edge(r, p) { 1.0 } else { 0.0 })
                .collect())
        }
    }

    fn grid() -> KnowledgeGraph {
        let mut kg = KnowledgeGraph::new(AmbiguityMode::Strict);
        for i in 0..12 {
            for j in 0..12 {
                if (i + j) % 3 == 0 {
                    let t = Triple::parse(&format!("http://x/a{i}"), "http://x/r", &format!("http://x/b{j}")).unwrap();
                    kg.add_triple(&t).unwrap();
                }
            }
        }
        kg
    }

    fn quick() -> CvSettings {
        CvSettings {
            embed: TrainConfig {
                epochs: 2,
                negatives_per_positive: 2,
                ..TrainConfig::default()
            },
            ..CvSettings::default()
        }
    }

    #[test]
    fn oracle_classifier_scores_perfectly() {
        let kg = grid();
        let r = kg.relation_id("http://x/r").unwrap();
        let report = cross_validate(&kg, r, 4, &Oracle, &quick()).unwrap();
        assert_eq!(report.rows.len(), 5);
        assert!(report.rows.iter().all(|row| row.f_measure == 1.0 && row.roc_auc == 1.0));
        assert_eq!(report.f_measure, Summary { mean: 1.0, std: 0.0 });
    }

    #[test]
    fn folds_are_shared_across_dimensions() {
        let kg = grid();
        let r = kg.relation_id("http://x/r").unwrap();
        let settings = quick();
        let a = fold_plan(&kg, r, &settings).unwrap();
        let b = fold_plan(&kg, r, &settings).unwrap();
        assert_eq!(a, b);
        let at = |dim| evaluate_fold(&kg, &a, 1, dim, &Oracle, &settings).unwrap().scores;
        let labels = |s: Vec<ScoredExample<f64>>| s.into_iter().map(|e| e.label).collect::<Vec<_>>();
        assert_eq!(labels(at(3)), labels(at(5)));
    }

    #[test]
    fn leaking_split_is_rejected() {
        let kg = grid();
        let r = kg.relation_id("http://x/r").unwrap();
        let plan = fold_plan(&kg, r, &quick()).unwrap();
        let split = build_split(&kg, &plan, 0, 9).unwrap();
        let mut edges = embedding_training_edges(&kg, &split);
        edges.push(split.test_pos[0]);
        let err = ensure_clean(&kg, &split, &edges).unwrap_err();
        assert_eq!(err.code(), "split/leakage");
    }
}
