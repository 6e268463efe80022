//! Link featurization and the classifiers trained on it.
//!
//! A pair `(u, v)` is represented by the concatenation `[e(u); e(v)]`,
//! subject first, so `(u, v)` and `(v, u)` are distinct inputs.

mod logreg;
mod mlp;

pub use logreg::{logreg_loss_gradient, train_logreg, train_logreg_with_history, LogisticModel, LogregConfig};
pub use mlp::{train_mlp, Activation, ArchPreset, Dense, MlpConfig, MlpModel};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{features} feature rows but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("training data needs both classes")]
    SingleClass,
    #[error("training diverged in epoch {epoch}")]
    NonFinite { epoch: usize },
    #[error("invalid classifier configuration: {0}")]
    Config(String),
}

impl ModelError {
    pub fn code(&self) -> &'static str {
        match self {
            ModelError::DimensionMismatch { .. } => "model/dimension-mismatch",
            ModelError::LengthMismatch { .. } => "model/length-mismatch",
            ModelError::SingleClass => "model/single-class",
            ModelError::NonFinite { .. } => "model/non-finite",
            ModelError::Config(_) => "model/config",
        }
    }
}

/// Ordered pair representation `[e(u); e(v)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkFeature<T>(Vec<T>);

impl<T: Scalar> LinkFeature<T> {
    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    pub fn subject_part(&self) -> &[T] {
        &self.0[..self.0.len() / 2]
    }

    pub fn object_part(&self) -> &[T] {
        &self.0[self.0.len() / 2..]
    }
}

pub fn featurize<T: Scalar>(subject: &[T], object: &[T]) -> Result<LinkFeature<T>, ModelError> {
    if subject.len() != object.len() {
        return Err(ModelError::DimensionMismatch {
            expected: subject.len(),
            got: object.len(),
        });
    }
    let mut v = Vec::with_capacity(2 * subject.len());
    v.extend_from_slice(subject);
    v.extend_from_slice(object);
    Ok(LinkFeature(v))
}

/// Binary operators for pair features. Only `Concat` preserves direction;
/// the others exist for ablations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairOperator {
    #[default]
    Concat,
    Average,
    Hadamard,
    L1,
    L2,
}

impl PairOperator {
    pub fn width(self, dim: usize) -> usize {
        match self {
            PairOperator::Concat => 2 * dim,
            _ => dim,
        }
    }

    pub fn apply<T: Scalar>(self, subject: &[T], object: &[T]) -> Result<Vec<T>, ModelError> {
        if self == PairOperator::Concat {
            return featurize(subject, object).map(LinkFeature::into_inner);
        }
        if subject.len() != object.len() {
            return Err(ModelError::DimensionMismatch {
                expected: subject.len(),
                got: object.len(),
            });
        }
        let half = T::of(0.5);
        Ok(subject
            .iter()
            .zip(object)
            .map(|(&a, &b)| match self {
                PairOperator::Average => (a + b) * half,
                PairOperator::Hadamard => a * b,
                PairOperator::L1 => (a - b).abs(),
                PairOperator::L2 => (a - b) * (a - b),
                PairOperator::Concat => unreachable!(),
            })
            .collect())
    }
}

/// Numerically stable logistic function.
pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `log(1 + exp(z))` without overflow.
pub(crate) fn softplus<T: Scalar>(z: T) -> T {
    z.max(T::zero()) + (-z.abs()).exp().ln_1p()
}

/// Anything that maps a feature vector to an edge probability.
pub trait LinkClassifier<T: Scalar> {
    fn input_dim(&self) -> usize;

    /// Pre-sigmoid score; the caller guarantees the dimension.
    fn logit(&self, feature: &[T]) -> T;

    fn predict_proba(&self, feature: &[T]) -> Result<T, ModelError> {
        if feature.len() != self.input_dim() {
            return Err(ModelError::DimensionMismatch {
                expected: self.input_dim(),
                got: feature.len(),
            });
        }
        Ok(sigmoid(self.logit(feature)))
    }
}

/// Serialized model file: the trained parameters together with the
/// configuration that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
#[serde(bound = "T: Scalar")]
pub enum ModelFile<T> {
    Logreg { config: LogregConfig, model: LogisticModel<T> },
    Mlp { config: MlpConfig, model: MlpModel<T> },
}

impl<T: Scalar> ModelFile<T> {
    pub fn classifier(&self) -> &dyn LinkClassifier<T> {
        match self {
            ModelFile::Logreg { model, .. } => model,
            ModelFile::Mlp { model, .. } => model,
        }
    }
}

pub(crate) fn check_training_data<T: Scalar>(features: &[Vec<T>], labels: &[bool]) -> Result<usize, ModelError> {
    if features.len() != labels.len() {
        return Err(ModelError::LengthMismatch {
            features: features.len(),
            labels: labels.len(),
        });
    }
    if !(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l)) {
        return Err(ModelError::SingleClass);
    }
    let width = features[0].len();
    if let Some(bad) = features.iter().find(|f| f.len() != width) {
        return Err(ModelError::DimensionMismatch {
            expected: width,
            got: bad.len(),
        });
    }
    Ok(width)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concatenation_is_ordered() {
        let f = featurize(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(f.values(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(f.subject_part(), &[1.0, 2.0]);
        let r = featurize(&[3.0, 4.0], &[1.0, 2.0]).unwrap();
        assert_ne!(f, r);
        let same = featurize(&[5.0f32, 6.0], &[5.0, 6.0]).unwrap();
        assert_eq!(same, featurize(&[5.0, 6.0], &[5.0, 6.0]).unwrap());
        assert!(featurize(&[1.0f64], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn operators() {
        let (a, b) = ([1.0f64, -2.0], [3.0, 1.0]);
        assert_eq!(PairOperator::Average.apply(&a, &b).unwrap(), vec![2.0, -0.5]);
        assert_eq!(PairOperator::Hadamard.apply(&a, &b).unwrap(), vec![3.0, -2.0]);
        assert_eq!(PairOperator::L1.apply(&a, &b).unwrap(), vec![2.0, 3.0]);
        assert_eq!(PairOperator::L2.apply(&a, &b).unwrap(), vec![4.0, 9.0]);
        assert_eq!(PairOperator::Concat.width(3), 6);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert!(sigmoid(-800.0f64) >= 0.0);
        assert!(sigmoid(800.0f64) <= 1.0);
        assert!((softplus(0.0f64) - 2f64.ln()).abs() < 1e-15);
        assert!((softplus(1000.0f64) - 1000.0).abs() < 1e-9);
    }
}
