use serde::{Deserialize, Serialize};

use super::{check_training_data, sigmoid, softplus, LinkClassifier, ModelError};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogregConfig {
    pub learning_rate: f64,
    /// Number of full-batch gradient steps.
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LogregConfig {
    fn default() -> Self {
        LogregConfig {
            learning_rate: 0.1,
            epochs: 500,
            l2: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LogisticModel<T> {
    pub weights: Vec<T>,
    pub bias: T,
    pub l2: f64,
}

impl<T: Scalar> LogisticModel<T> {
    pub fn zeros(dim: usize, l2: f64) -> Self {
        LogisticModel {
            weights: vec![T::zero(); dim],
            bias: T::zero(),
            l2,
        }
    }
}

impl<T: Scalar> LinkClassifier<T> for LogisticModel<T> {
    fn input_dim(&self) -> usize {
        self.weights.len()
    }

    fn logit(&self, x: &[T]) -> T {
        self.weights.iter().zip(x).fold(self.bias, |acc, (&w, &xi)| acc + w * xi)
    }
}

/// Mean binary cross-entropy plus `l2/2 · |w|²`, and its gradient with
/// respect to the weights and the bias.
pub fn logreg_loss_gradient<T: Scalar>(
    model: &LogisticModel<T>,
    features: &[Vec<T>],
    labels: &[bool],
) -> (T, Vec<T>, T) {
    let n = T::from_usize(features.len()).expect("n fits");
    let l2 = T::of(model.l2);
    let mut grad_w = vec![T::zero(); model.weights.len()];
    let mut grad_b = T::zero();
    let mut loss = T::zero();
    for (x, &y) in features.iter().zip(labels) {
        let z = model.logit(x);
        let y = if y { T::one() } else { T::zero() };
        loss = loss + softplus(z) - y * z;
        let err = sigmoid(z) - y;
        for (g, &xi) in grad_w.iter_mut().zip(x) {
            *g = *g + err * xi;
        }
        grad_b = grad_b + err;
    }
    let half = T::of(0.5);
    let penalty = model.weights.iter().map(|&w| w * w).sum::<T>() * l2 * half;
    for (g, &w) in grad_w.iter_mut().zip(&model.weights) {
        *g = *g / n + l2 * w;
    }
    (loss / n + penalty, grad_w, grad_b / n)
}

/// Full-batch gradient descent from zero weights.
pub fn train_logreg<T: Scalar>(
    features: &[Vec<T>],
    labels: &[bool],
    config: &LogregConfig,
) -> Result<LogisticModel<T>, ModelError> {
    train_logreg_with_history(features, labels, config).map(|(m, _)| m)
}

/// [`train_logreg`] also returning the objective before each step.
pub fn train_logreg_with_history<T: Scalar>(
    features: &[Vec<T>],
    labels: &[bool],
    config: &LogregConfig,
) -> Result<(LogisticModel<T>, Vec<f64>), ModelError> {
    if !(config.learning_rate > 0.0) || !(config.l2 >= 0.0) {
        return Err(ModelError::Config("learning_rate must be positive and l2 non-negative".into()));
    }
    let width = check_training_data(features, labels)?;
    let mut model = LogisticModel::zeros(width, config.l2);
    let lr = T::of(config.learning_rate);
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let (loss, grad_w, grad_b) = logreg_loss_gradient(&model, features, labels);
        if !loss.is_finite() {
            return Err(ModelError::NonFinite { epoch });
        }
        history.push(loss.as_f64());
        for (w, g) in model.weights.iter_mut().zip(grad_w) {
            *w = *w - lr * g;
        }
        model.bias = model.bias - lr * grad_b;
    }
    if model.weights.iter().any(|w| !w.is_finite()) || !model.bias.is_finite() {
        return Err(ModelError::NonFinite { epoch: config.epochs });
    }
    Ok((model, history))
}
