//! Finite-difference verification of the per-example embedding gradients.

use rand::Rng as _;

use super::{batch_loss, example_gradients, softmax_loss, LossKind, TrainConfig};
use crate::kg::Pair;
use crate::rng::{derive_seed, rng};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    /// Number of embedding entries compared.
    pub entries_checked: usize,
    /// Examples skipped because a hinge term sat within the step of its kink.
    pub kinks_skipped: usize,
}

const STEP: f64 = 1e-6;

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-10 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

fn example_loss(kind: LossKind, margin: f64, rows: &[Vec<f64>], u: usize, v: usize, negs: &[usize]) -> f64 {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let pos = dot(&rows[u], &rows[v]);
    let n: Vec<f64> = negs.iter().map(|&i| dot(&rows[u], &rows[i])).collect();
    match kind {
        LossKind::Hinge => batch_loss(pos, &n, margin),
        LossKind::Softmax => softmax_loss(pos, &n),
    }
}

/// True when some hinge term `margin − sim(u,v) + sim(u,n)` is within the
/// reach of a finite-difference step of zero.
pub fn near_kink(margin: f64, rows: &[Vec<f64>], u: usize, v: usize, negs: &[usize]) -> bool {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let pos = dot(&rows[u], &rows[v]);
    negs.iter().any(|&n| (margin - pos + dot(&rows[u], &rows[n])).abs() < 1e-4)
}

/// Checks one example: returns the maximum relative error between analytic
/// and central-difference gradients over every entry of every involved
/// row, and the number of entries compared.
pub fn check_example(
    kind: LossKind,
    margin: f64,
    rows: &mut [Vec<f64>],
    u: usize,
    v: usize,
    negs: &[usize],
) -> (f64, usize) {
    let d = rows[u].len();
    let k = negs.len();
    let negatives: Vec<f64> = negs.iter().flat_map(|&n| rows[n].clone()).collect();
    let mut gs = vec![0.0; d];
    let mut go = vec![0.0; d];
    let mut gn = vec![0.0; k * d];
    example_gradients(kind, margin, &rows[u], &rows[v], &negatives, &mut gs, &mut go, &mut gn, &mut Vec::new());

    // accumulate per entity, since a negative may repeat
    let mut analytic: Vec<(usize, Vec<f64>)> = vec![(u, gs), (v, go)];
    for (i, &n) in negs.iter().enumerate() {
        match analytic.iter_mut().find(|(e, _)| *e == n) {
            Some((_, g)) => g.iter_mut().zip(&gn[i * d..(i + 1) * d]).for_each(|(a, b)| *a += b),
            None => analytic.push((n, gn[i * d..(i + 1) * d].to_vec())),
        }
    }

    let mut max_err: f64 = 0.0;
    let mut entries = 0;
    for (entity, grad) in &analytic {
        for j in 0..d {
            let saved = rows[*entity][j];
            rows[*entity][j] = saved + STEP;
            let plus = example_loss(kind, margin, rows, u, v, negs);
            rows[*entity][j] = saved - STEP;
            let minus = example_loss(kind, margin, rows, u, v, negs);
            rows[*entity][j] = saved;
            let numeric = (plus - minus) / (2.0 * STEP);
            max_err = max_err.max(relative_error(grad[j], numeric));
            entries += 1;
        }
    }
    (max_err, entries)
}

/// Compares analytic example gradients against central differences on a
/// small probe graph with `num_entities` rows initialized uniformly in
/// `[-1, 1]`. Each probe edge gets `config.negatives_per_positive` negatives
/// drawn uniformly among entities that are neither the subject's objects
/// nor the object itself.
pub fn gradient_check(config: &TrainConfig, num_entities: usize, probe: &[Pair]) -> GradientCheck {
    let d = config.dim;
    let k = config.negatives_per_positive;
    let mut r = rng(derive_seed(config.seed, "gradient-check"));
    let mut rows: Vec<Vec<f64>> = (0..num_entities)
        .map(|_| (0..d).map(|_| r.random_range(-1.0..1.0)).collect())
        .collect();
    let mut out = GradientCheck::default();

    for &(u, v) in probe {
        let (u, v) = (u.index(), v.index());
        let forbidden = |c: usize| c == u || c == v || probe.contains(&(crate::kg::EntityId(u as u32), crate::kg::EntityId(c as u32)));
        let candidates: Vec<usize> = (0..num_entities).filter(|&c| !forbidden(c)).collect();
        if candidates.is_empty() || u == v {
            continue;
        }
        let negs: Vec<usize> = (0..k).map(|_| candidates[r.random_range(0..candidates.len())]).collect();

        if config.loss == LossKind::Hinge && near_kink(config.margin, &rows, u, v, &negs) {
            out.kinks_skipped += 1;
            continue;
        }
        let (err, n) = check_example(config.loss, config.margin, &mut rows, u, v, &negs);
        out.max_relative_error = out.max_relative_error.max(err);
        out.entries_checked += n;
    }
    out
}
