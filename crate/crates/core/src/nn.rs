//! Minimal trainable network engine: dense and convolutional layers with
//! ReLU, max pooling, flatten, softmax cross-entropy, backprop, SGD and Adam,
//! and optional per-connection dropout on dense layers.
//!
//! Everything is f64 and single-threaded, so training is bit-deterministic
//! given (seed, spec, config, dataset). Convolutions use "same" zero padding
//! with stride 1; pooling windows are non-overlapping.

use crate::attack::{attack_network, AttackConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::init::{init_layer, InitializerSpec};
use crate::rng::Rng;
use crate::tensor::WeightTensor;
use alloc::vec;
use alloc::vec::Vec;
use libm::{exp, log, sqrt};

/// One architectural element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerSpec {
    Dense { width: usize },
    /// Stride-1 convolution with "same" zero padding.
    Conv { fh: usize, fw: usize, filters: usize },
    /// Non-overlapping max pooling with a square window (stride = window).
    MaxPool { window: usize },
    Flatten,
}

/// Architecture plus initialization and dropout conventions.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    /// `[d]` for tabular input, `[h, w, c]` for images.
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
    pub initializer: InitializerSpec,
    /// Per-connection dropout probability for dense layers, in [0, 1).
    pub dropout_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd { lr: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    /// Adam with the usual defaults (0.9, 0.999, 1e-8).
    pub fn adam(lr: f64) -> Self {
        Optimizer::Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn lr(&self) -> f64 {
        match self {
            Optimizer::Sgd { lr } => *lr,
            Optimizer::Adam { lr, .. } => *lr,
        }
    }

    pub fn with_lr(self, lr: f64) -> Self {
        match self {
            Optimizer::Sgd { .. } => Optimizer::Sgd { lr },
            Optimizer::Adam { beta1, beta2, eps, .. } => Optimizer::Adam { lr, beta1, beta2, eps },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

/// Shape of an activation as it flows through the net.
#[derive(Debug, Clone, PartialEq)]
enum ActShape {
    Flat(usize),
    Image { h: usize, w: usize, c: usize },
}

impl ActShape {
    fn len(&self) -> usize {
        match self {
            ActShape::Flat(d) => *d,
            ActShape::Image { h, w, c } => h * w * c,
        }
    }
}

/// A resolved, executable step. `relu` is false only on the final layer.
/// Conv and MaxPool record their input spatial dims from the shape chain.
#[derive(Debug, Clone)]
enum Step {
    Dense { weights: WeightTensor, bias: Vec<f64>, relu: bool },
    Conv { weights: WeightTensor, bias: Vec<f64>, h: usize, w: usize },
    MaxPool { window: usize, h: usize, w: usize, c: usize },
    Flatten,
}

/// Adam moment buffers per parameters tensor.
#[derive(Debug, Clone, Default)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    steps: Vec<Step>,
    classes: usize,
    adam_t: u64,
    adam_w: Vec<Moments>,
    adam_b: Vec<Moments>,
}

/// Gradients in the same layout as [`Network::weights`] / biases.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Per-epoch evaluation snapshot. Epoch 0 is the freshly initialized net.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTrace {
    pub epochs: Vec<EpochRecord>,
    pub best_accuracy: f64,
    /// Epoch (0 = before training) at which the best accuracy first appeared.
    pub best_epoch: usize,
    /// Train loss of the final epoch.
    pub final_loss: f64,
}

impl NetworkSpec {
    /// Resolve the activation shape after every layer; errors if shapes do
    /// not compose or the last layer is not dense.
    fn shape_chain(&self) -> Result<Vec<ActShape>> {
        let mut shapes = Vec::with_capacity(self.layers.len() + 1);
        let first = match self.input_shape.as_slice() {
            [d] if *d > 0 => ActShape::Flat(*d),
            [h, w, c] if *h > 0 && *w > 0 && *c > 0 => ActShape::Image { h: *h, w: *w, c: *c },
            other => {
                return Err(Error::InvalidShape(alloc::format!(
                    "input shape must be [d] or [h,w,c], got {other:?}"
                )))
            }
        };
        shapes.push(first);
        for (i, layer) in self.layers.iter().enumerate() {
            let prev = shapes.last().unwrap().clone();
            let next = match (layer, prev) {
                (LayerSpec::Dense { width }, ActShape::Flat(_)) if *width > 0 => {
                    ActShape::Flat(*width)
                }
                (LayerSpec::Conv { fh, fw, filters }, ActShape::Image { h, w, .. })
                    if *fh > 0 && *fw > 0 && *filters > 0 =>
                {
                    ActShape::Image { h, w, c: *filters }
                }
                (LayerSpec::MaxPool { window }, ActShape::Image { h, w, c })
                    if *window > 0 && h >= *window && w >= *window =>
                {
                    ActShape::Image { h: h / window, w: w / window, c }
                }
                (LayerSpec::Flatten, img @ ActShape::Image { .. }) => ActShape::Flat(img.len()),
                (l, p) => {
                    return Err(Error::InvalidShape(alloc::format!(
                        "layer {i} ({l:?}) cannot follow activation shape {p:?}"
                    )))
                }
            };
            shapes.push(next);
        }
        match (self.layers.last(), self.dropout_rate) {
            (Some(LayerSpec::Dense { .. }), d) if (0.0..1.0).contains(&d) => Ok(shapes),
            (Some(LayerSpec::Dense { .. }), d) => {
                Err(Error::InvalidParam(alloc::format!("dropout rate {d} outside [0,1)")))
            }
            _ => Err(Error::InvalidShape("network must end in a dense layer".into())),
        }
    }

    /// Width of the output layer (= number of classes).
    pub fn output_width(&self) -> Option<usize> {
        match self.layers.last() {
            Some(LayerSpec::Dense { width }) => Some(*width),
            _ => None,
        }
    }
}

impl Network {
    /// Initialize all parameters in layer order from one seeded generator.
    pub fn init(spec: NetworkSpec, seed: u64) -> Result<Network> {
        let shapes = spec.shape_chain()?;
        let mut rng = Rng::new(seed);
        let mut steps = Vec::with_capacity(spec.layers.len());
        let n_layers = spec.layers.len();
        let mut param_index = 0usize;
        for (i, layer) in spec.layers.iter().enumerate() {
            let step = match layer {
                LayerSpec::Dense { width } => {
                    let in_dim = shapes[i].len();
                    let (w, bias) = init_layer(&spec.initializer, &[*width, in_dim], &mut rng)?;
                    let w = w_with_index(w, param_index);
                    param_index += 1;
                    Step::Dense { weights: w, bias, relu: i + 1 != n_layers }
                }
                LayerSpec::Conv { fh, fw, filters } => {
                    let (h, w_dim, c) = match shapes[i] {
                        ActShape::Image { h, w, c } => (h, w, c),
                        _ => unreachable!("validated by shape_chain"),
                    };
                    let (w, bias) = init_layer(&spec.initializer, &[*fh, *fw, c, *filters], &mut rng)?;
                    let w = w_with_index(w, param_index);
                    param_index += 1;
                    Step::Conv { weights: w, bias, h, w: w_dim }
                }
                LayerSpec::MaxPool { window } => {
                    let (h, w, c) = match shapes[i] {
                        ActShape::Image { h, w, c } => (h, w, c),
                        _ => unreachable!("validated by shape_chain"),
                    };
                    Step::MaxPool { window: *window, h, w, c }
                }
                LayerSpec::Flatten => Step::Flatten,
            };
            steps.push(step);
        }
        let classes = spec.output_width().expect("validated by shape_chain");
        Ok(Network { spec, steps, classes, adam_t: 0, adam_w: Vec::new(), adam_b: Vec::new() })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn input_len(&self) -> usize {
        self.spec.input_shape.iter().product()
    }

    /// Weight tensors in order of initialization.
    pub fn weights(&self) -> Vec<WeightTensor> {
        self.steps
            .iter()
            .filter_map(|s| match s {
                Step::Dense { weights, .. } | Step::Conv { weights, .. } => Some(weights.clone()),
                _ => None,
            })
            .collect()
    }

    /// Bias vectors in the same order as [`Network::weights`].
    pub fn biases(&self) -> Vec<Vec<f64>> {
        self.steps
            .iter()
            .filter_map(|s| match s {
                Step::Dense { bias, .. } | Step::Conv { bias, .. } => Some(bias.clone()),
                _ => None,
            })
            .collect()
    }

    /// Replace all weight tensors (shape-checked); biases are untouched.
    pub fn set_weights(&mut self, new: Vec<WeightTensor>) -> Result<()> {
        let slots: Vec<&mut WeightTensor> = self
            .steps
            .iter_mut()
            .filter_map(|s| match s {
                Step::Dense { weights, .. } | Step::Conv { weights, .. } => Some(weights),
                _ => None,
            })
            .collect();
        if slots.len() != new.len() {
            return Err(Error::InvalidShape(alloc::format!(
                "network has {} weight tensors, got {}",
                slots.len(),
                new.len()
            )));
        }
        for (slot, w) in slots.into_iter().zip(new) {
            if slot.shape() != w.shape() {
                return Err(Error::InvalidShape(alloc::format!(
                    "shape {:?} cannot replace {:?}",
                    w.shape(),
                    slot.shape()
                )));
            }
            *slot = w;
        }
        Ok(())
    }

    /// Replace all bias vectors (length-checked).
    pub fn set_biases(&mut self, new: Vec<Vec<f64>>) -> Result<()> {
        let slots: Vec<&mut Vec<f64>> = self
            .steps
            .iter_mut()
            .filter_map(|s| match s {
                Step::Dense { bias, .. } | Step::Conv { bias, .. } => Some(bias),
                _ => None,
            })
            .collect();
        if slots.len() != new.len() {
            return Err(Error::InvalidShape("bias vector count mismatch".into()));
        }
        for (slot, b) in slots.into_iter().zip(new) {
            if slot.len() != b.len() {
                return Err(Error::InvalidShape("bias length mismatch".into()));
            }
            *slot = b;
        }
        Ok(())
    }

    /// Apply an attack to the initial weights in place.
    pub fn apply_attack(&mut self, cfg: &AttackConfig) -> Result<()> {
        let attacked = attack_network(&self.weights(), cfg)?;
        self.set_weights(attacked)
    }

    /// Mean cross-entropy loss over an explicit batch.
    pub fn batch_loss(&self, batch: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
        if batch.len() != labels.len() || batch.is_empty() {
            return Err(Error::InvalidData("batch and labels must be equal-length, non-empty".into()));
        }
        let mut loss = 0.0;
        for (x, &label) in batch.iter().zip(labels) {
            if label >= self.classes {
                return Err(Error::InvalidData("label out of range".into()));
            }
            let acts = self.forward_trace(x, None);
            let probs = softmax(acts.last().unwrap());
            loss += -log(probs[label].max(1e-300));
        }
        Ok(loss / batch.len() as f64)
    }

    /// Forward pass for one sample, returning every intermediate activation
    /// (index 0 = input, last = logits).
    fn forward_trace(&self, input: &[f64], masks: Option<&[Vec<f64>]>) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.steps.len() + 1);
        acts.push(input.to_vec());
        let mut dense_i = 0usize;
        let mut param_i = 0usize;
        for step in &self.steps {
            let x = acts.last().unwrap();
            let out = match step {
                Step::Dense { weights, bias, relu } => {
                    let mask = masks.map(|m| &m[dense_i]);
                    dense_i += 1;
                    param_i += 1;
                    dense_forward(weights, bias, x, *relu, mask)
                }
                Step::Conv { weights, bias, h, w } => {
                    param_i += 1;
                    conv_forward(weights, bias, x, *h, *w)
                }
                Step::MaxPool { window, h, w, c } => maxpool_forward(x, *window, *h, *w, *c).0,
                Step::Flatten => x.clone(),
            };
            acts.push(out);
        }
        let _ = param_i;
        acts
    }

    /// Class probabilities for a batch of inputs.
    pub fn forward(&self, batch: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let want = self.input_len();
        batch
            .iter()
            .map(|x| {
                if x.len() != want {
                    return Err(Error::InvalidShape(alloc::format!(
                        "input length {} does not match network input {want}",
                        x.len()
                    )));
                }
                let acts = self.forward_trace(x, None);
                Ok(softmax(acts.last().unwrap()))
            })
            .collect()
    }

    /// Post-ReLU activations after every layer for one sample (no softmax).
    pub fn layer_outputs(&self, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        if input.len() != self.input_len() {
            return Err(Error::InvalidShape("input length mismatch".into()));
        }
        let mut acts = self.forward_trace(input, None);
        acts.remove(0);
        Ok(acts)
    }

    /// Shapes `[h, w, c]` or `[d]` after each layer, for reporting.
    pub fn layer_shapes(&self) -> Result<Vec<Vec<usize>>> {
        Ok(self
            .spec
            .shape_chain()?
            .into_iter()
            .skip(1)
            .map(|s| match s {
                ActShape::Flat(d) => vec![d],
                ActShape::Image { h, w, c } => vec![h, w, c],
            })
            .collect())
    }

    /// Gradient of the mean cross-entropy over the batch w.r.t. every
    /// parameter. `masks`, when given, are the dropout masks used in the
    /// corresponding forward pass.
    fn backward_masked(
        &self,
        batch: &[Vec<f64>],
        labels: &[usize],
        masks: Option<&[Vec<f64>]>,
    ) -> Result<Gradients> {
        if batch.len() != labels.len() || batch.is_empty() {
            return Err(Error::InvalidData("batch and labels must be equal-length, non-empty".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= self.classes) {
            return Err(Error::InvalidData(alloc::format!(
                "label {bad} out of range for {} classes",
                self.classes
            )));
        }
        let mut gw: Vec<Vec<f64>> = self
            .weights()
            .iter()
            .map(|w| vec![0.0; w.len()])
            .collect();
        let mut gb: Vec<Vec<f64>> = self.biases().iter().map(|b| vec![0.0; b.len()]).collect();
        let scale = 1.0 / batch.len() as f64;

        for (x, &label) in batch.iter().zip(labels) {
            let acts = self.forward_trace(x, masks);
            let probs = softmax(acts.last().unwrap());
            // dL/dlogits for mean cross-entropy.
            let mut delta: Vec<f64> = probs
                .iter()
                .enumerate()
                .map(|(i, p)| (p - f64::from(u8::from(i == label))) * scale)
                .collect();
            // Walk steps backwards.
            let mut param_i = gw.len();
            let mut dense_i = self.steps.iter().filter(|s| matches!(s, Step::Dense { .. })).count();
            for (si, step) in self.steps.iter().enumerate().rev() {
                let input = &acts[si];
                let output = &acts[si + 1];
                match step {
                    Step::Dense { weights, relu, .. } => {
                        param_i -= 1;
                        dense_i -= 1;
                        if *relu {
                            gate_relu(&mut delta, output);
                        }
                        let mask = masks.map(|m| &m[dense_i]);
                        delta = dense_backward(
                            weights,
                            input,
                            &delta,
                            &mut gw[param_i],
                            &mut gb[param_i],
                            mask,
                        );
                    }
                    Step::Conv { weights, h, w, .. } => {
                        param_i -= 1;
                        gate_relu(&mut delta, output);
                        delta = conv_backward(
                            weights,
                            input,
                            &delta,
                            &mut gw[param_i],
                            &mut gb[param_i],
                            *h,
                            *w,
                        );
                    }
                    Step::MaxPool { window, h, w, c } => {
                        let (_, argmax) = maxpool_forward(input, *window, *h, *w, *c);
                        let mut up = vec![0.0; input.len()];
                        for (o, &src) in argmax.iter().enumerate() {
                            up[src] += delta[o];
                        }
                        delta = up;
                    }
                    Step::Flatten => {}
                }
            }
        }
        Ok(Gradients { weights: gw, biases: gb })
    }

    /// Gradient of the mean cross-entropy, no dropout.
    pub fn backward(&self, batch: &[Vec<f64>], labels: &[usize]) -> Result<Gradients> {
        self.backward_masked(batch, labels, None)
    }

    /// Mean cross-entropy loss and accuracy over the given sample indices.
    pub fn evaluate(&self, data: &Dataset, idx: &[usize]) -> Result<(f64, f64)> {
        let mut loss = 0.0;
        let mut correct = 0usize;
        for &i in idx {
            let acts = self.forward_trace(data.sample(i), None);
            let probs = softmax(acts.last().unwrap());
            let label = data.labels[i];
            loss += -log(probs[label].max(1e-300));
            let pred = argmax(&probs);
            correct += usize::from(pred == label);
        }
        let n = idx.len().max(1) as f64;
        Ok((loss / n, correct as f64 / n))
    }

    fn dropout_masks(&self, rng: &mut Rng) -> Option<Vec<Vec<f64>>> {
        let p = self.spec.dropout_rate;
        if p == 0.0 {
            return None;
        }
        let keep = 1.0 - p;
        let masks = self
            .steps
            .iter()
            .filter_map(|s| match s {
                Step::Dense { weights, .. } => Some(
                    (0..weights.len())
                        .map(|_| if rng.uniform() < p { 0.0 } else { 1.0 / keep })
                        .collect(),
                ),
                _ => None,
            })
            .collect();
        Some(masks)
    }

    fn sgd_step(&mut self, grads: &Gradients, lr: f64) {
        let mut param_i = 0usize;
        for step in &mut self.steps {
            if let Step::Dense { weights, bias, .. } | Step::Conv { weights, bias, .. } = step {
                let mut data = weights.data().to_vec();
                for (w, g) in data.iter_mut().zip(&grads.weights[param_i]) {
                    *w -= lr * g;
                }
                *weights = weights.with_data_unchecked(data);
                for (b, g) in bias.iter_mut().zip(&grads.biases[param_i]) {
                    *b -= lr * g;
                }
                param_i += 1;
            }
        }
    }

    fn adam_step(&mut self, grads: &Gradients, lr: f64, beta1: f64, beta2: f64, eps: f64) {
        if self.adam_w.is_empty() {
            self.adam_w = grads
                .weights
                .iter()
                .map(|g| Moments { m: vec![0.0; g.len()], v: vec![0.0; g.len()] })
                .collect();
            self.adam_b = grads
                .biases
                .iter()
                .map(|g| Moments { m: vec![0.0; g.len()], v: vec![0.0; g.len()] })
                .collect();
        }
        self.adam_t += 1;
        let bc1 = 1.0 - pow_int(beta1, self.adam_t);
        let bc2 = 1.0 - pow_int(beta2, self.adam_t);
        let mut param_i = 0usize;
        for step in &mut self.steps {
            if let Step::Dense { weights, bias, .. } | Step::Conv { weights, bias, .. } = step {
                let mw = &mut self.adam_w[param_i];
                let mut data = weights.data().to_vec();
                for (i, (w, g)) in data.iter_mut().zip(&grads.weights[param_i]).enumerate() {
                    mw.m[i] = beta1 * mw.m[i] + (1.0 - beta1) * g;
                    mw.v[i] = beta2 * mw.v[i] + (1.0 - beta2) * g * g;
                    let mhat = mw.m[i] / bc1;
                    let vhat = mw.v[i] / bc2;
                    *w -= lr * mhat / (sqrt(vhat) + eps);
                }
                *weights = weights.with_data_unchecked(data);
                let mb = &mut self.adam_b[param_i];
                for (i, (b, g)) in bias.iter_mut().zip(&grads.biases[param_i]).enumerate() {
                    mb.m[i] = beta1 * mb.m[i] + (1.0 - beta1) * g;
                    mb.v[i] = beta2 * mb.v[i] + (1.0 - beta2) * g * g;
                    let mhat = mb.m[i] / bc1;
                    let vhat = mb.v[i] / bc2;
                    *b -= lr * mhat / (sqrt(vhat) + eps);
                }
                param_i += 1;
            }
        }
    }

    fn step(&mut self, grads: &Gradients, opt: Optimizer) {
        match opt {
            Optimizer::Sgd { lr } => self.sgd_step(grads, lr),
            Optimizer::Adam { lr, beta1, beta2, eps } => {
                self.adam_step(grads, lr, beta1, beta2, eps)
            }
        }
    }

    fn params_finite(&self) -> bool {
        self.steps.iter().all(|s| match s {
            Step::Dense { weights, bias, .. } | Step::Conv { weights, bias, .. } => {
                weights.data().iter().all(|v| v.is_finite()) && bias.iter().all(|v| v.is_finite())
            }
            _ => true,
        })
    }

    /// Train on the dataset's train split, evaluating the test split every
    /// epoch (including epoch 0, before any update). Divergence aborts with
    /// the epoch index.
    pub fn train(&mut self, data: &Dataset, cfg: &TrainConfig) -> Result<TrainingTrace> {
        data.validate()?;
        if cfg.batch_size == 0 {
            return Err(Error::InvalidParam("batch_size must be >= 1".into()));
        }
        if cfg.optimizer.lr() < 0.0 {
            return Err(Error::InvalidParam("learning rate must be >= 0".into()));
        }
        if data.classes != self.classes {
            return Err(Error::InvalidShape(alloc::format!(
                "dataset has {} classes, network outputs {}",
                data.classes,
                self.classes
            )));
        }
        let mut rng = Rng::new(cfg.seed);
        let mut trace = Vec::with_capacity(cfg.epochs + 1);
        let record = |net: &Network, epoch: usize| -> Result<EpochRecord> {
            let (train_loss, _) = net.evaluate(data, &data.train_idx)?;
            let (test_loss, test_accuracy) = net.evaluate(data, &data.test_idx)?;
            Ok(EpochRecord { epoch, train_loss, test_loss, test_accuracy })
        };
        trace.push(record(self, 0)?);

        let mut order = data.train_idx.clone();
        for epoch in 1..=cfg.epochs {
            rng.shuffle(&mut order);
            for chunk in order.chunks(cfg.batch_size) {
                let batch: Vec<Vec<f64>> = chunk.iter().map(|&i| data.sample(i).to_vec()).collect();
                let labels: Vec<usize> = chunk.iter().map(|&i| data.labels[i]).collect();
                let masks = self.dropout_masks(&mut rng);
                let grads = self.backward_masked(&batch, &labels, masks.as_deref())?;
                self.step(&grads, cfg.optimizer);
                if !self.params_finite() {
                    return Err(Error::Diverged { epoch });
                }
            }
            trace.push(record(self, epoch)?);
        }

        let (best_epoch, best) = trace
            .iter()
            .map(|r| r.test_accuracy)
            .enumerate()
            .fold((0usize, f64::NEG_INFINITY), |(bi, bv), (i, v)| {
                if v > bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            });
        let final_loss = trace.last().unwrap().train_loss;
        Ok(TrainingTrace { epochs: trace, best_accuracy: best, best_epoch, final_loss })
    }
}

fn w_with_index(w: WeightTensor, index: usize) -> WeightTensor {
    w.with_layer_index(index)
}

fn pow_int(base: f64, exp: u64) -> f64 {
    let mut acc = 1.0;
    let mut b = base;
    let mut e = exp;
    while e > 0 {
        if e & 1 == 1 {
            acc *= b;
        }
        b *= b;
        e >>= 1;
    }
    acc
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in xs.iter().enumerate() {
        if *v > xs[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| exp(z - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn gate_relu(delta: &mut [f64], post: &[f64]) {
    for (d, &p) in delta.iter_mut().zip(post) {
        if p <= 0.0 {
            *d = 0.0;
        }
    }
}

fn dense_forward(
    w: &WeightTensor,
    bias: &[f64],
    x: &[f64],
    relu: bool,
    mask: Option<&Vec<f64>>,
) -> Vec<f64> {
    let (rows, cols) = (w.rows(), w.cols());
    let wd = w.data();
    let mut out = Vec::with_capacity(rows);
    for i in 0..rows {
        let row = &wd[i * cols..(i + 1) * cols];
        let mut acc = bias[i];
        match mask {
            None => {
                for (wv, xv) in row.iter().zip(x) {
                    acc += wv * xv;
                }
            }
            Some(m) => {
                let mrow = &m[i * cols..(i + 1) * cols];
                for ((wv, xv), mv) in row.iter().zip(x).zip(mrow) {
                    acc += wv * mv * xv;
                }
            }
        }
        out.push(if relu { acc.max(0.0) } else { acc });
    }
    out
}

/// Returns the upstream delta; accumulates into gw/gb.
fn dense_backward(
    w: &WeightTensor,
    input: &[f64],
    delta: &[f64],
    gw: &mut [f64],
    gb: &mut [f64],
    mask: Option<&Vec<f64>>,
) -> Vec<f64> {
    let (rows, cols) = (w.rows(), w.cols());
    let wd = w.data();
    let mut up = vec![0.0; cols];
    for i in 0..rows {
        let d = delta[i];
        gb[i] += d;
        if d == 0.0 {
            continue;
        }
        let row = &wd[i * cols..(i + 1) * cols];
        let grow = &mut gw[i * cols..(i + 1) * cols];
        match mask {
            None => {
                for j in 0..cols {
                    grow[j] += d * input[j];
                    up[j] += d * row[j];
                }
            }
            Some(m) => {
                let mrow = &m[i * cols..(i + 1) * cols];
                for j in 0..cols {
                    grow[j] += d * input[j] * mrow[j];
                    up[j] += d * row[j] * mrow[j];
                }
            }
        }
    }
    up
}

/// Conv forward: "same" zero padding, stride 1, ReLU. Input layout
/// (h, w, c) row-major; output (h, w, filters). Even filter sizes pad one
/// less at the top/left, like the usual SAME convention.
fn conv_forward(wt: &WeightTensor, bias: &[f64], x: &[f64], h: usize, w: usize) -> Vec<f64> {
    let (fh, fw, c, filters) = wt.conv_dims();
    let wd = wt.data();
    let (ph, pw) = ((fh - 1) / 2, (fw - 1) / 2);
    let mut out = vec![0.0; h * w * filters];
    for oi in 0..h {
        for oj in 0..w {
            for f in 0..filters {
                let mut acc = bias[f];
                for ki in 0..fh {
                    let ii = oi + ki;
                    if ii < ph || ii - ph >= h {
                        continue;
                    }
                    let ii = ii - ph;
                    for kj in 0..fw {
                        let jj = oj + kj;
                        if jj < pw || jj - pw >= w {
                            continue;
                        }
                        let jj = jj - pw;
                        let xin = &x[(ii * w + jj) * c..(ii * w + jj) * c + c];
                        let wrow = &wd[((ki * fw + kj) * c) * filters + f..];
                        for (ch, xv) in xin.iter().enumerate() {
                            acc += wrow[ch * filters] * xv;
                        }
                    }
                }
                out[(oi * w + oj) * filters + f] = acc.max(0.0);
            }
        }
    }
    out
}

/// Returns the upstream delta; accumulates weight/bias gradients.
fn conv_backward(
    wt: &WeightTensor,
    input: &[f64],
    delta: &[f64],
    gw: &mut [f64],
    gb: &mut [f64],
    h: usize,
    w: usize,
) -> Vec<f64> {
    let (fh, fw, c, filters) = wt.conv_dims();
    let wd = wt.data();
    let (ph, pw) = ((fh - 1) / 2, (fw - 1) / 2);
    let mut up = vec![0.0; h * w * c];
    for oi in 0..h {
        for oj in 0..w {
            for f in 0..filters {
                let d = delta[(oi * w + oj) * filters + f];
                if d == 0.0 {
                    continue;
                }
                gb[f] += d;
                for ki in 0..fh {
                    let ii = oi + ki;
                    if ii < ph || ii - ph >= h {
                        continue;
                    }
                    let ii = ii - ph;
                    for kj in 0..fw {
                        let jj = oj + kj;
                        if jj < pw || jj - pw >= w {
                            continue;
                        }
                        let jj = jj - pw;
                        for ch in 0..c {
                            let widx = ((ki * fw + kj) * c + ch) * filters + f;
                            let xidx = (ii * w + jj) * c + ch;
                            gw[widx] += d * input[xidx];
                            up[xidx] += d * wd[widx];
                        }
                    }
                }
            }
        }
    }
    up
}

fn maxpool_forward(
    x: &[f64],
    window: usize,
    h: usize,
    w: usize,
    c: usize,
) -> (Vec<f64>, Vec<usize>) {
    let oh = h / window;
    let ow = w / window;
    let mut out = vec![f64::NEG_INFINITY; oh * ow * c];
    let mut arg = vec![0usize; oh * ow * c];
    for i in 0..oh {
        for j in 0..ow {
            for ch in 0..c {
                let oidx = (i * ow + j) * c + ch;
                for di in 0..window {
                    for dj in 0..window {
                        let src = ((i * window + di) * w + (j * window + dj)) * c + ch;
                        if x[src] > out[oidx] {
                            out[oidx] = x[src];
                            arg[oidx] = src;
                        }
                    }
                }
            }
        }
    }
    (out, arg)
}
