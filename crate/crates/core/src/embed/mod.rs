//! Log-linear entity embeddings trained with k-negative sampling.
//!
//! Every entity owns one `d`-dimensional row; the score of a pair is the
//! dot product of its two rows. For each positive pair `(u, v)` the trainer
//! draws `k` corrupted objects `v⁻` uniformly over all entities (rejecting
//! training edges) and takes a stochastic subgradient step on the batch
//! loss of `(sim(u, v), sim(u, v⁻₁), …, sim(u, v⁻ₖ))`.

mod gradcheck;
mod io;

pub use gradcheck::{gradient_check, GradientCheck};
pub use io::{
    format_significant, read_binary, read_text, write_binary, write_text, EMBEDDING_MAGIC, EMBEDDING_VERSION,
};

use std::collections::HashSet;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{EntityId, Pair};
use crate::rng::{derive_seed, rng};
use crate::scalar::{AtomicScalar, Scalar};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("no training edges")]
    EmptyGraph,
    #[error("loss diverged in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("malformed embedding file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl EmbedError {
    pub fn code(&self) -> &'static str {
        match self {
            EmbedError::DimensionMismatch { .. } => "embed/dimension-mismatch",
            EmbedError::EmptyGraph => "embed/empty-graph",
            EmbedError::NonFiniteLoss { .. } => "embed/non-finite-loss",
            EmbedError::Config(_) => "embed/config",
            EmbedError::Format(_) => "embed/format",
            EmbedError::Io(_) => "embed/io",
        }
    }
}

/// Row-major `rows × dim` matrix of entity vectors, row `i` for entity id `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMatrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> EmbeddingMatrix<T> {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        EmbeddingMatrix {
            dim,
            data: vec![T::zero(); rows * dim],
        }
    }

    pub fn from_vec(dim: usize, data: Vec<T>) -> Result<Self, EmbedError> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(EmbedError::Format(format!("{} values do not form rows of {dim}", data.len())));
        }
        Ok(EmbeddingMatrix { dim, data })
    }

    /// Entries drawn uniformly from `[-1/dim, 1/dim]`.
    pub fn random(rows: usize, dim: usize, seed: u64) -> Self {
        let bound = 1.0 / dim as f64;
        let mut r = rng(seed);
        let data = (0..rows * dim)
            .map(|_| T::of(r.random_range(-bound..=bound)))
            .collect();
        EmbeddingMatrix { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim.max(1)
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn entity(&self, e: EntityId) -> &[T] {
        self.row(e.index())
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Dot product.
pub fn similarity<T: Scalar>(a: &[T], b: &[T]) -> Result<T, EmbedError> {
    if a.len() != b.len() {
        return Err(EmbedError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(dot(a, b))
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Mean margin ranking loss over the negatives.
    #[default]
    Hinge,
    /// Negative log-softmax of the positive among positive and negatives.
    Softmax,
}

/// `(1/k) Σᵢ max(0, margin − pos + negᵢ)`.
pub fn batch_loss<T: Scalar>(pos_sim: T, neg_sims: &[T], margin: T) -> T {
    let k = T::from_usize(neg_sims.len()).expect("k fits");
    neg_sims
        .iter()
        .map(|&n| (margin - pos_sim + n).max(T::zero()))
        .sum::<T>()
        / k
}

/// `−log(exp(pos) / (exp(pos) + Σᵢ exp(negᵢ)))`, computed stably.
pub fn softmax_loss<T: Scalar>(pos_sim: T, neg_sims: &[T]) -> T {
    let m = neg_sims.iter().fold(pos_sim, |m, &x| m.max(x));
    let z: T = (pos_sim - m).exp() + neg_sims.iter().map(|&x| (x - m).exp()).sum::<T>();
    m + z.ln() - pos_sim
}

/// Loss of one example and its derivatives with respect to the positive
/// similarity and each negative similarity (written into `d_neg`).
pub fn loss_sim_gradients<T: Scalar>(kind: LossKind, margin: T, pos: T, negs: &[T], d_neg: &mut [T]) -> (T, T) {
    let k = T::from_usize(negs.len()).expect("k fits");
    match kind {
        LossKind::Hinge => {
            let mut loss = T::zero();
            let mut d_pos = T::zero();
            for (d, &n) in d_neg.iter_mut().zip(negs) {
                let term = margin - pos + n;
                if term > T::zero() {
                    loss = loss + term;
                    d_pos = d_pos - T::one() / k;
                    *d = T::one() / k;
                } else {
                    *d = T::zero();
                }
            }
            (loss / k, d_pos)
        }
        LossKind::Softmax => {
            let m = negs.iter().fold(pos, |m, &x| m.max(x));
            let ep = (pos - m).exp();
            let mut z = ep;
            for (d, &n) in d_neg.iter_mut().zip(negs) {
                *d = (n - m).exp();
                z = z + *d;
            }
            for d in d_neg.iter_mut() {
                *d = *d / z;
            }
            (m + z.ln() - pos, ep / z - T::one())
        }
    }
}

/// Loss of one `(subject, object, negatives)` example and the gradient with
/// respect to every involved row. `negatives` and `grad_negatives` are
/// `k × d` row-major. Gradients are computed from the given (pre-update) rows.
#[allow(clippy::too_many_arguments)]
pub fn example_gradients<T: Scalar>(
    kind: LossKind,
    margin: T,
    subject: &[T],
    object: &[T],
    negatives: &[T],
    grad_subject: &mut [T],
    grad_object: &mut [T],
    grad_negatives: &mut [T],
    scratch: &mut Vec<T>,
) -> T {
    let d = subject.len();
    let k = negatives.len() / d;
    let pos = dot(subject, object);
    let neg_sims: Vec<T> = negatives.chunks_exact(d).map(|n| dot(subject, n)).collect();
    scratch.clear();
    scratch.resize(k, T::zero());
    let (loss, d_pos) = loss_sim_gradients(kind, margin, pos, &neg_sims, scratch);
    for j in 0..d {
        grad_subject[j] = d_pos * object[j];
        grad_object[j] = d_pos * subject[j];
    }
    for (i, (&d_neg, n)) in scratch.iter().zip(negatives.chunks_exact(d)).enumerate() {
        let g = &mut grad_negatives[i * d..(i + 1) * d];
        for j in 0..d {
            grad_subject[j] = grad_subject[j] + d_neg * n[j];
            g[j] = d_neg * subject[j];
        }
    }
    loss
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub negatives_per_positive: usize,
    pub margin: f64,
    pub seed: u64,
    pub threads: usize,
    pub loss: LossKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 50,
            epochs: 10,
            learning_rate: 0.05,
            negatives_per_positive: 10,
            margin: 0.05,
            seed: 0,
            threads: 1,
            loss: LossKind::Hinge,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.dim == 0 {
            return Err(EmbedError::Config("dim must be positive".into()));
        }
        if self.negatives_per_positive == 0 {
            return Err(EmbedError::Config("negatives_per_positive must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(EmbedError::Config("learning_rate must be positive".into()));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(EmbedError::Config("margin must be non-negative".into()));
        }
        if self.threads == 0 {
            return Err(EmbedError::Config("threads must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub wall_clock_seconds: f64,
    pub examples_processed: u64,
}

/// Upper bound on rejected draws per negative before giving up on it.
const MAX_REJECTIONS: usize = 64;

struct SharedRows<T: Scalar> {
    dim: usize,
    cells: Vec<T::Atomic>,
}

impl<T: Scalar> SharedRows<T> {
    fn load_row(&self, row: usize, out: &mut [T]) {
        let cells = &self.cells[row * self.dim..(row + 1) * self.dim];
        for (o, c) in out.iter_mut().zip(cells) {
            *o = c.load();
        }
    }

    fn add_scaled(&self, row: usize, grad: &[T], step: T) {
        let cells = &self.cells[row * self.dim..(row + 1) * self.dim];
        for (c, &g) in cells.iter().zip(grad) {
            c.store(c.load() - step * g);
        }
    }
}

struct Worker<T> {
    subject: Vec<T>,
    object: Vec<T>,
    negatives: Vec<T>,
    neg_ids: Vec<usize>,
    grad_subject: Vec<T>,
    grad_object: Vec<T>,
    grad_negatives: Vec<T>,
    scratch: Vec<T>,
}

impl<T: Scalar> Worker<T> {
    fn new(dim: usize, k: usize) -> Self {
        Worker {
            subject: vec![T::zero(); dim],
            object: vec![T::zero(); dim],
            negatives: Vec::with_capacity(k * dim),
            neg_ids: Vec::with_capacity(k),
            grad_subject: vec![T::zero(); dim],
            grad_object: vec![T::zero(); dim],
            grad_negatives: vec![T::zero(); k * dim],
            scratch: Vec::with_capacity(k),
        }
    }

    /// One SGD step; returns the example loss, or `None` if no negative could be drawn.
    #[allow(clippy::too_many_arguments)]
    fn step(
        &mut self,
        rows: &SharedRows<T>,
        pair: Pair,
        num_entities: usize,
        known: &HashSet<Pair>,
        config: &TrainConfig,
        rng: &mut crate::rng::Rng,
    ) -> Option<T> {
        let d = rows.dim;
        let (u, v) = pair;
        self.neg_ids.clear();
        for _ in 0..config.negatives_per_positive {
            for _ in 0..MAX_REJECTIONS {
                let cand = rng.random_range(0..num_entities);
                if !known.contains(&(u, EntityId(cand as u32))) {
                    self.neg_ids.push(cand);
                    break;
                }
            }
        }
        if self.neg_ids.is_empty() {
            return None;
        }
        let k = self.neg_ids.len();
        rows.load_row(u.index(), &mut self.subject);
        rows.load_row(v.index(), &mut self.object);
        self.negatives.resize(k * d, T::zero());
        for (i, &n) in self.neg_ids.iter().enumerate() {
            rows.load_row(n, &mut self.negatives[i * d..(i + 1) * d]);
        }
        let grad_negatives = &mut self.grad_negatives[..k * d];
        let loss = example_gradients(
            config.loss,
            T::of(config.margin),
            &self.subject,
            &self.object,
            &self.negatives,
            &mut self.grad_subject,
            &mut self.grad_object,
            grad_negatives,
            &mut self.scratch,
        );
        let lr = T::of(config.learning_rate);
        rows.add_scaled(u.index(), &self.grad_subject, lr);
        rows.add_scaled(v.index(), &self.grad_object, lr);
        for (i, &n) in self.neg_ids.iter().enumerate() {
            rows.add_scaled(n, &grad_negatives[i * d..(i + 1) * d], lr);
        }
        Some(loss)
    }
}

/// Trains one row per entity on the given positive pairs.
pub fn train<T: Scalar>(
    num_entities: usize,
    edges: &[Pair],
    config: &TrainConfig,
) -> Result<(EmbeddingMatrix<T>, TrainReport), EmbedError> {
    train_observed(num_entities, edges, config, &|_| {})
}

/// [`train`] that reports every positive pair it visits to `observer`.
pub fn train_observed<T: Scalar>(
    num_entities: usize,
    edges: &[Pair],
    config: &TrainConfig,
    observer: &(dyn Fn(Pair) + Sync),
) -> Result<(EmbeddingMatrix<T>, TrainReport), EmbedError> {
    config.validate()?;
    if edges.is_empty() || num_entities == 0 {
        return Err(EmbedError::EmptyGraph);
    }
    let start = Instant::now();
    let init = EmbeddingMatrix::<T>::random(num_entities, config.dim, derive_seed(config.seed, "init"));
    let rows = SharedRows::<T> {
        dim: config.dim,
        cells: init.data.iter().map(|&x| T::Atomic::new(x)).collect(),
    };
    let known: HashSet<Pair> = edges.iter().copied().collect();
    let mut order: Vec<Pair> = edges.to_vec();
    let mut report = TrainReport::default();
    let threads = config.threads.min(order.len()).max(1);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng(derive_seed(config.seed, &format!("shuffle/{epoch}"))));
        let chunk = order.len().div_ceil(threads);
        let run_chunk = |w: usize, part: &[Pair]| -> (f64, u64) {
            let mut r = rng(derive_seed(config.seed, &format!("epoch/{epoch}/worker/{w}")));
            let mut worker = Worker::<T>::new(config.dim, config.negatives_per_positive);
            let mut total = 0.0;
            let mut n = 0;
            for &pair in part {
                observer(pair);
                if let Some(loss) = worker.step(&rows, pair, num_entities, &known, config, &mut r) {
                    total += loss.as_f64();
                    n += 1;
                }
            }
            (total, n)
        };
        let parts: Vec<(f64, u64)> = if threads == 1 {
            vec![run_chunk(0, &order)]
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = order
                    .chunks(chunk)
                    .enumerate()
                    .map(|(w, part)| {
                        let run_chunk = &run_chunk;
                        scope.spawn(move || run_chunk(w, part))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
            })
        };
        let (total, n) = parts.iter().fold((0.0, 0u64), |(t, c), &(pt, pc)| (t + pt, c + pc));
        let mean = if n == 0 { 0.0 } else { total / n as f64 };
        if !mean.is_finite() {
            return Err(EmbedError::NonFiniteLoss { epoch });
        }
        report.epoch_losses.push(mean);
        report.examples_processed += order.len() as u64;
    }

    let data: Vec<T> = rows.cells.iter().map(AtomicScalar::load).collect();
    let matrix = EmbeddingMatrix { dim: config.dim, data };
    if !matrix.is_finite() {
        return Err(EmbedError::NonFiniteLoss {
            epoch: config.epochs.saturating_sub(1),
        });
    }
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    Ok((matrix, report))
}
