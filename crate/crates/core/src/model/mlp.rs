use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{check_training_data, sigmoid, softplus, LinkClassifier, ModelError};
use crate::rng::{derive_seed, rng};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Identity,
}

impl Activation {
    fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => z.max(T::zero()),
            Activation::Identity => z,
        }
    }

    fn derivative<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu if z > T::zero() => T::one(),
            Activation::Relu => T::zero(),
            Activation::Identity => T::one(),
        }
    }
}

/// Hidden-layer presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArchPreset {
    /// One hidden layer of 200 units (the default).
    Shallow200,
    Deep20x3,
    Deep200x3,
}

impl ArchPreset {
    pub fn hidden(self) -> Vec<usize> {
        match self {
            ArchPreset::Shallow200 => vec![200],
            ArchPreset::Deep20x3 => vec![20, 20, 20],
            ArchPreset::Deep200x3 => vec![200, 200, 200],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: ArchPreset::Shallow200.hidden(),
            activation: Activation::Relu,
            learning_rate: 0.01,
            momentum: 0.9,
            epochs: 50,
            batch_size: 128,
            seed: 0,
        }
    }
}

/// Fully connected layer; `weights` is `outputs × inputs` row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![T::zero(); inputs * outputs],
            bias: vec![T::zero(); outputs],
        }
    }

    fn he_uniform(inputs: usize, outputs: usize, r: &mut crate::rng::Rng) -> Self {
        let limit = (6.0 / inputs as f64).sqrt();
        Dense {
            inputs,
            outputs,
            weights: (0..inputs * outputs).map(|_| T::of(r.random_range(-limit..=limit))).collect(),
            bias: vec![T::zero(); outputs],
        }
    }

    fn forward(&self, x: &[T], out: &mut Vec<T>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.inputs).zip(&self.bias).map(|(row, &b)| {
            row.iter().zip(x).fold(b, |acc, (&w, &xi)| acc + w * xi)
        }));
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.weights.iter_mut().chain(self.bias.iter_mut())
    }
}

/// Multi-layer perceptron with a single sigmoid output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MlpModel<T> {
    /// Input width, hidden widths, then 1.
    pub layer_sizes: Vec<usize>,
    pub layers: Vec<Dense<T>>,
    pub activation: Activation,
    pub seed: u64,
}

impl<T: Scalar> MlpModel<T> {
    /// He-uniform weights and zero biases.
    pub fn new(input: usize, hidden: &[usize], activation: Activation, seed: u64) -> Self {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mut r = rng(derive_seed(seed, "mlp-init"));
        let layers = sizes.windows(2).map(|w| Dense::he_uniform(w[0], w[1], &mut r)).collect();
        MlpModel {
            layer_sizes: sizes,
            layers,
            activation,
            seed,
        }
    }

    fn zero_like(&self) -> Vec<Dense<T>> {
        self.layers.iter().map(|l| Dense::zeros(l.inputs, l.outputs)).collect()
    }

    /// Pre-activations of every layer for one input.
    fn forward_all(&self, x: &[T], pre: &mut Vec<Vec<T>>, post: &mut Vec<Vec<T>>) {
        pre.resize_with(self.layers.len(), Vec::new);
        post.resize_with(self.layers.len(), Vec::new);
        for (i, layer) in self.layers.iter().enumerate() {
            let input: &[T] = if i == 0 { x } else { &post[i - 1] };
            let mut z = std::mem::take(&mut pre[i]);
            layer.forward(input, &mut z);
            let last = i + 1 == self.layers.len();
            post[i].clear();
            post[i].extend(z.iter().map(|&v| if last { v } else { self.activation.apply(v) }));
            pre[i] = z;
        }
    }

    /// Adds the gradient of one example's cross-entropy into `grads`;
    /// returns that example's loss.
    fn accumulate(&self, x: &[T], y: bool, grads: &mut [Dense<T>], ws: &mut Workspace<T>) -> T {
        self.forward_all(x, &mut ws.pre, &mut ws.post);
        let last = self.layers.len() - 1;
        let z = ws.pre[last][0];
        let y = if y { T::one() } else { T::zero() };
        let loss = softplus(z) - y * z;

        ws.delta.clear();
        ws.delta.push(sigmoid(z) - y);
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input: &[T] = if i == 0 { x } else { &ws.post[i - 1] };
            let g = &mut grads[i];
            for (o, &d) in ws.delta.iter().enumerate() {
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (gw, &xi) in row.iter_mut().zip(input) {
                    *gw = *gw + d * xi;
                }
                g.bias[o] = g.bias[o] + d;
            }
            if i > 0 {
                ws.next.clear();
                ws.next.resize(layer.inputs, T::zero());
                for (o, &d) in ws.delta.iter().enumerate() {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (n, &w) in ws.next.iter_mut().zip(row) {
                        *n = *n + d * w;
                    }
                }
                for (n, &zp) in ws.next.iter_mut().zip(&ws.pre[i - 1]) {
                    *n = *n * self.activation.derivative(zp);
                }
                std::mem::swap(&mut ws.delta, &mut ws.next);
            }
        }
        loss
    }

    /// Mean cross-entropy over the data and its gradient for every layer.
    pub fn loss_and_gradients(&self, features: &[Vec<T>], labels: &[bool]) -> (T, Vec<Dense<T>>) {
        let mut grads = self.zero_like();
        let mut ws = Workspace::default();
        let mut loss = T::zero();
        for (x, &y) in features.iter().zip(labels) {
            loss = loss + self.accumulate(x, y, &mut grads, &mut ws);
        }
        let n = T::from_usize(features.len().max(1)).expect("n fits");
        for g in &mut grads {
            g.params_mut().for_each(|p| *p = *p / n);
        }
        (loss / n, grads)
    }

    fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|p| p.is_finite()))
    }
}

struct Workspace<T> {
    pre: Vec<Vec<T>>,
    post: Vec<Vec<T>>,
    delta: Vec<T>,
    next: Vec<T>,
}

impl<T> Default for Workspace<T> {
    fn default() -> Self {
        Workspace {
            pre: Vec::new(),
            post: Vec::new(),
            delta: Vec::new(),
            next: Vec::new(),
        }
    }
}

impl<T: Scalar> LinkClassifier<T> for MlpModel<T> {
    fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    fn logit(&self, x: &[T]) -> T {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward(&cur, &mut next);
            if i + 1 < self.layers.len() {
                next.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur[0]
    }
}

/// Mini-batch SGD with momentum on binary cross-entropy. The example order
/// is reshuffled every epoch from the configured seed.
pub fn train_mlp<T: Scalar>(
    features: &[Vec<T>],
    labels: &[bool],
    config: &MlpConfig,
) -> Result<MlpModel<T>, ModelError> {
    if config.batch_size == 0 || !(config.learning_rate > 0.0) || !(0.0..1.0).contains(&config.momentum) {
        return Err(ModelError::Config(
            "batch_size must be positive, learning_rate positive, momentum in [0, 1)".into(),
        ));
    }
    if config.hidden.contains(&0) {
        return Err(ModelError::Config("hidden layer sizes must be positive".into()));
    }
    let width = check_training_data(features, labels)?;
    let mut model = MlpModel::new(width, &config.hidden, config.activation, config.seed);
    let mut velocity = model.zero_like();
    let mut grads = model.zero_like();
    let mut ws = Workspace::default();
    let mut order: Vec<usize> = (0..features.len()).collect();
    let lr = T::of(config.learning_rate);
    let mu = T::of(config.momentum);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng(derive_seed(config.seed, &format!("mlp-epoch/{epoch}"))));
        let mut epoch_loss = T::zero();
        for batch in order.chunks(config.batch_size) {
            grads.iter_mut().for_each(|g| g.params_mut().for_each(|p| *p = T::zero()));
            for &i in batch {
                epoch_loss = epoch_loss + model.accumulate(&features[i], labels[i], &mut grads, &mut ws);
            }
            let scale = lr / T::from_usize(batch.len()).expect("batch fits");
            for ((layer, v), g) in model.layers.iter_mut().zip(&mut velocity).zip(&grads) {
                let grad = g.weights.iter().chain(&g.bias);
                for ((p, v), &g) in layer.params_mut().zip(v.params_mut()).zip(grad) {
                    *v = mu * *v - scale * g;
                    *p = *p + *v;
                }
            }
        }
        if !epoch_loss.is_finite() || !model.is_finite() {
            return Err(ModelError::NonFinite { epoch });
        }
    }
    Ok(model)
}
