//! Classification metrics, fold summaries and delta reports against a
//! published baseline.

pub mod cv;

pub use cv::{
    cross_validate, evaluate_fold, CvError, CvReport, CvSettings, FoldClassifier, FoldData, FoldOutcome,
    LogregClassifier, MlpClassifier,
};

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("no positive examples")]
    NoPositives,
    #[error("ROC AUC needs both positive and negative examples")]
    SingleClass,
    #[error("non-finite score")]
    NonFiniteScore,
    #[error("relation {0} is not in the baseline table")]
    UnknownRelation(String),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MetricError {
    pub fn code(&self) -> &'static str {
        match self {
            MetricError::NoPositives => "metrics/no-positives",
            MetricError::SingleClass => "metrics/single-class",
            MetricError::NonFiniteScore => "metrics/non-finite-score",
            MetricError::UnknownRelation(_) => "metrics/unknown-relation",
            MetricError::Format { .. } => "metrics/format",
            MetricError::Io(_) => "metrics/io",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredExample<T> {
    pub score: T,
    pub label: bool,
}

impl<T> ScoredExample<T> {
    pub fn new(score: T, label: bool) -> Self {
        ScoredExample { score, label }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

/// Counts with a score `>= threshold` predicted positive.
pub fn confusion<T: Scalar>(examples: &[ScoredExample<T>], threshold: T) -> Confusion {
    let mut c = Confusion::default();
    for e in examples {
        match (e.score >= threshold, e.label) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    c
}

/// Harmonic mean of precision and recall at `threshold`; 0 when both vanish.
pub fn f_measure<T: Scalar>(examples: &[ScoredExample<T>], threshold: T) -> Result<f64, MetricError> {
    if !examples.iter().any(|e| e.label) {
        return Err(MetricError::NoPositives);
    }
    let c = confusion(examples, threshold);
    let precision = if c.tp + c.fp == 0 {
        0.0
    } else {
        c.tp as f64 / (c.tp + c.fp) as f64
    };
    let recall = c.tp as f64 / (c.tp + c.fn_) as f64;
    if precision + recall == 0.0 {
        Ok(0.0)
    } else {
        Ok(2.0 * precision * recall / (precision + recall))
    }
}

/// Mann-Whitney estimate of the ROC AUC, with tied scores counted as half
/// a correctly ordered pair. Ranks are averaged over tie groups; the rank
/// sum is kept doubled so it stays an exact integer.
pub fn roc_auc<T: Scalar>(examples: &[ScoredExample<T>]) -> Result<f64, MetricError> {
    if examples.iter().any(|e| !e.score.is_finite()) {
        return Err(MetricError::NonFiniteScore);
    }
    let n_pos = examples.iter().filter(|e| e.label).count() as u128;
    let n_neg = examples.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::SingleClass);
    }
    let mut sorted: Vec<&ScoredExample<T>> = examples.iter().collect();
    sorted.sort_by(|a, b| a.score.partial_cmp(&b.score).expect("finite scores"));

    let mut rank_sum_x2: u128 = 0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1].score == sorted[i].score {
            j += 1;
        }
        // ranks i+1 ..= j+1 share the average (i + j + 2) / 2
        let positives = sorted[i..=j].iter().filter(|e| e.label).count() as u128;
        rank_sum_x2 += positives * (i + j + 2) as u128;
        i = j + 1;
    }
    let u_x2 = rank_sum_x2 - n_pos * (n_pos + 1);
    Ok(u_x2 as f64 / (2 * n_pos * n_neg) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub relation: String,
    pub dim: usize,
    pub fold: usize,
    pub f_measure: f64,
    pub roc_auc: f64,
}

/// Mean and population standard deviation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

pub fn summarize(values: &[f64]) -> Summary {
    if values.is_empty() {
        return Summary::default();
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Summary { mean, std: var.sqrt() }
}

pub const METRICS_CSV_HEADER: &str = "relation,dim,fold,f_measure,roc_auc";

/// Per-fold CSV with a fixed column order and six decimals.
pub fn write_metrics_csv<W: Write>(rows: &[MetricRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{METRICS_CSV_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{},{},{:.6},{:.6}", r.relation, r.dim, r.fold, r.f_measure, r.roc_auc)?;
    }
    w.flush()
}

pub fn read_metrics_csv(text: &str) -> Result<Vec<MetricRow>, MetricError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| MetricError::Format { line: i + 1, message };
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(bad(format!("expected 5 columns, found {}", cols.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number {s:?}")));
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("bad integer {s:?}")));
        rows.push(MetricRow {
            relation: cols[0].to_owned(),
            dim: int(cols[1])?,
            fold: int(cols[2])?,
            f_measure: num(cols[3])?,
            roc_auc: num(cols[4])?,
        });
    }
    Ok(rows)
}

/// Published per-relation reference scores, `(F-measure, ROC AUC)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineTable {
    pub entries: BTreeMap<String, (f64, f64)>,
}

const SOTA_BASELINE: &str = include_str!("../../data/baseline_sota.csv");

impl BaselineTable {
    /// The bundled state-of-the-art scores for the eight biomedical relations.
    pub fn sota() -> Self {
        Self::from_csv(SOTA_BASELINE).expect("bundled baseline parses")
    }

    /// Parses `relation,f_measure,roc_auc` rows after a header line.
    pub fn from_csv(text: &str) -> Result<Self, MetricError> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| MetricError::Format { line: i + 1, message };
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(bad(format!("expected 3 columns, found {}", cols.len())));
            }
            let f: f64 = cols[1].parse().map_err(|_| bad(format!("bad F-measure {:?}", cols[1])))?;
            let auc: f64 = cols[2].parse().map_err(|_| bad(format!("bad ROC AUC {:?}", cols[2])))?;
            entries.insert(cols[0].to_owned(), (f, auc));
        }
        Ok(BaselineTable { entries })
    }

    /// Looks a relation up by exact name, then by the last segment of its IRI.
    pub fn get(&self, relation: &str) -> Option<(f64, f64)> {
        self.entries.get(relation).copied().or_else(|| {
            let local = relation.rsplit(['/', '#']).next().unwrap_or(relation);
            self.entries.get(local).copied()
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub relation: String,
    pub dim: usize,
    pub mean_f_measure: f64,
    pub mean_roc_auc: f64,
    pub delta_f_measure: f64,
    pub delta_roc_auc: f64,
}

/// Averages the measured rows per `(relation, dim)` and subtracts the baseline.
pub fn delta_report(measured: &[MetricRow], baseline: &BaselineTable) -> Result<Vec<DeltaRow>, MetricError> {
    let mut groups: BTreeMap<(String, usize), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in measured {
        let g = groups.entry((r.relation.clone(), r.dim)).or_default();
        g.0.push(r.f_measure);
        g.1.push(r.roc_auc);
    }
    groups
        .into_iter()
        .map(|((relation, dim), (f, auc))| {
            let (base_f, base_auc) = baseline
                .get(&relation)
                .ok_or_else(|| MetricError::UnknownRelation(relation.clone()))?;
            let (mf, ma) = (summarize(&f).mean, summarize(&auc).mean);
            Ok(DeltaRow {
                relation,
                dim,
                mean_f_measure: mf,
                mean_roc_auc: ma,
                delta_f_measure: mf - base_f,
                delta_roc_auc: ma - base_auc,
            })
        })
        .collect()
}

/// Signed three-decimal rendering such as `+0.279` or `-0.020`; zero is `+0.000`.
pub fn format_delta(delta: f64) -> String {
    let s = format!("{delta:+.3}");
    if s == "-0.000" {
        "+0.000".into()
    } else {
        s
    }
}

/// One row per relation: F-measure deltas for each dimension, then ROC AUC
/// deltas for each dimension.
pub fn render_delta_table(rows: &[DeltaRow]) -> String {
    let mut dims: Vec<usize> = rows.iter().map(|r| r.dim).collect();
    dims.sort_unstable();
    dims.dedup();
    let mut relations: Vec<&str> = rows.iter().map(|r| r.relation.as_str()).collect();
    relations.sort_unstable();
    relations.dedup();
    let width = relations.iter().map(|r| r.len()).max().unwrap_or(8).max(8);

    let mut out = format!("{:width$}", "relation");
    for label in ["F", "AUC"] {
        for d in &dims {
            out.push_str(&format!(" {:>8}", format!("{label}@{d}")));
        }
    }
    out.push('\n');
    for rel in relations {
        out.push_str(&format!("{rel:width$}"));
        for auc in [false, true] {
            for d in &dims {
                let cell = rows
                    .iter()
                    .find(|r| r.relation == rel && r.dim == *d)
                    .map(|r| format_delta(if auc { r.delta_roc_auc } else { r.delta_f_measure }))
                    .unwrap_or_else(|| "-".into());
                out.push_str(&format!(" {cell:>8}"));
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(pairs: &[(f64, bool)]) -> Vec<ScoredExample<f64>> {
        pairs.iter().map(|&(s, l)| ScoredExample::new(s, l)).collect()
    }

    #[test]
    fn f_measure_cases() {
        let perfect = ex(&[(1.0, true), (1.0, true), (0.0, false)]);
        assert_eq!(f_measure(&perfect, 0.5).unwrap(), 1.0);
        // TP=1, FP=1, FN=0
        let half = ex(&[(0.9, true), (0.8, false), (0.1, false)]);
        assert!((f_measure(&half, 0.5).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let low = ex(&[(0.1, true), (0.2, false)]);
        assert_eq!(f_measure(&low, 0.5).unwrap(), 0.0);
        assert!(matches!(f_measure(&ex(&[(0.9, false)]), 0.5), Err(MetricError::NoPositives)));
    }

    #[test]
    fn auc_cases() {
        assert_eq!(roc_auc(&ex(&[(0.9, true), (0.8, true), (0.1, false)])).unwrap(), 1.0);
        assert_eq!(roc_auc(&ex(&[(0.5, true), (0.5, false), (0.5, true)])).unwrap(), 0.5);
        assert_eq!(roc_auc(&ex(&[(0.9, true), (0.4, true), (0.6, false)])).unwrap(), 0.5);
        assert_eq!(roc_auc(&ex(&[(0.1, true), (0.9, false)])).unwrap(), 0.0);
        assert!(matches!(roc_auc(&ex(&[(0.9, true)])), Err(MetricError::SingleClass)));
        assert!(matches!(
            roc_auc(&ex(&[(f64::NAN, true), (0.0, false)])),
            Err(MetricError::NonFiniteScore)
        ));
    }

    #[test]
    fn summary_of_folds() {
        let s = summarize(&[0.8, 0.9, 1.0, 0.9, 0.8]);
        assert!((s.mean - 0.88).abs() < 1e-12);
        assert!((s.std - 0.0748331477).abs() < 1e-9);
    }

    #[test]
    fn bundled_baseline_has_eight_relations() {
        let b = BaselineTable::sota();
        assert_eq!(b.entries.len(), 8);
        assert_eq!(b.get("has-indication"), Some((0.72, 0.79)));
        assert_eq!(b.get("http://example.org/rel/has-target"), Some((0.94, 0.97)));
    }

    #[test]
    fn delta_formatting() {
        assert_eq!(format_delta(0.999 - 0.72), "+0.279");
        assert_eq!(format_delta(0.92 - 0.94), "-0.020");
        assert_eq!(format_delta(0.0), "+0.000");
        assert_eq!(format_delta(-0.0001), "+0.000");
    }

    #[test]
    fn unknown_relation_is_an_error() {
        let rows = vec![MetricRow { relation: "nope".into(), dim: 5, fold: 0, f_measure: 1.0, roc_auc: 1.0 }];
        assert!(matches!(
            delta_report(&rows, &BaselineTable::sota()),
            Err(MetricError::UnknownRelation(_))
        ));
    }

    #[test]
    fn metrics_csv_round_trip() {
        let rows = vec![MetricRow { relation: "r".into(), dim: 10, fold: 3, f_measure: 0.5, roc_auc: 0.75 }];
        let mut buf = Vec::new();
        write_metrics_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "relation,dim,fold,f_measure,roc_auc\nr,10,3,0.500000,0.750000\n");
        assert_eq!(read_metrics_csv(&text).unwrap(), rows);
    }
}
