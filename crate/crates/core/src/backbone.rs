//! The frozen feature-extraction backbone.
//!
//! A small multilayer perceptron (flatten, tanh hidden layers, linear
//! feature layer) is trained on the public half of the data with a
//! throwaway classification layer, then frozen. Downstream code only ever
//! reads features from it and differentiates through it with respect to the
//! *input*; its parameters never change again, which is what makes cluster-
//! local unlearning exact.

use sha2::{Digest, Sha256};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::num::{softmax_cross_entropy, Matrix};
use crate::prompt::ClassifierHead;
use crate::rng::{domain, stream_id, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Linear,
}

/// One dense layer; the weight is `input_dim x output_dim` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    fn forward(&self, input: &[f64], output: &mut Vec<f64>) {
        let out_dim = self.weight.cols();
        output.clear();
        output.extend_from_slice(&self.bias);
        for (i, &xi) in input.iter().enumerate() {
            let row = self.weight.row(i);
            for (o, &w) in output.iter_mut().zip(row) {
                *o += xi * w;
            }
        }
        if self.activation == Activation::Tanh {
            for o in output.iter_mut() {
                *o = o.tanh();
            }
        }
        let _ = out_dim;
    }

    /// Converts an output-side gradient into a pre-activation gradient,
    /// given this layer's own output.
    fn pre_activation_grad(&self, output: &[f64], d_output: &[f64]) -> Vec<f64> {
        match self.activation {
            Activation::Linear => d_output.to_vec(),
            Activation::Tanh => output
                .iter()
                .zip(d_output)
                .map(|(a, d)| d * (1.0 - a * a))
                .collect(),
        }
    }

    /// Gradient with respect to this layer's input.
    fn input_grad(&self, d_pre: &[f64]) -> Vec<f64> {
        (0..self.weight.rows())
            .map(|i| {
                self.weight
                    .row(i)
                    .iter()
                    .zip(d_pre)
                    .map(|(w, d)| w * d)
                    .sum()
            })
            .collect()
    }

    fn param_count(&self) -> usize {
        self.weight.rows() * self.weight.cols() + self.bias.len()
    }
}

/// Training hyperparameters for the backbone.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub hidden_dims: Vec<usize>,
    pub feature_dim: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Domain(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Domain("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Domain("batch_size must be at least 1".into()));
        }
        if self.hidden_dims.is_empty() || self.hidden_dims.iter().any(|&d| d == 0) {
            return Err(Error::Domain("hidden_dims must be non-empty and positive".into()));
        }
        if self.feature_dim == 0 {
            return Err(Error::Domain("feature_dim must be positive".into()));
        }
        Ok(())
    }

    pub fn digest(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(self.learning_rate.to_le_bytes());
        hasher.update((self.epochs as u64).to_le_bytes());
        hasher.update((self.batch_size as u64).to_le_bytes());
        hasher.update(self.seed.to_le_bytes());
        hasher.update((self.hidden_dims.len() as u64).to_le_bytes());
        for &d in &self.hidden_dims {
            hasher.update((d as u64).to_le_bytes());
        }
        hasher.update((self.feature_dim as u64).to_le_bytes());
        hasher.finalize().into()
    }
}

/// The frozen feature extractor.
#[derive(Debug, Clone, PartialEq)]
pub struct BackboneModel {
    layers: Vec<Layer>,
    input_shape: (usize, usize, usize),
    feature_dim: usize,
    frozen: bool,
    train_config_digest: [u8; 32],
}

/// Per-sample loss and gradients of the cross-entropy through a classifier
/// head and the frozen backbone, taken with respect to the input pixels and
/// the head parameters only.
#[derive(Debug, Clone, PartialEq)]
pub struct InputGradient {
    pub loss: f64,
    pub grad_pixels: Vec<f64>,
    pub grad_head_weight: Matrix,
    pub grad_head_bias: Vec<f64>,
}

/// Summary returned by [`pretrain`] alongside the frozen model.
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainReport {
    pub final_train_accuracy: f64,
    pub epoch_mean_losses: Vec<f64>,
}

impl BackboneModel {
    /// Assembles a model from explicit layers, validating dimension chaining.
    pub fn from_parts(
        layers: Vec<Layer>,
        input_shape: (usize, usize, usize),
        frozen: bool,
        train_config_digest: [u8; 32],
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Domain("backbone needs at least one layer".into()));
        }
        let mut dim = input_shape.0 * input_shape.1 * input_shape.2;
        for (i, layer) in layers.iter().enumerate() {
            if layer.weight.rows() != dim {
                return Err(Error::Shape(format!(
                    "layer {i} expects input {} but gets {dim}",
                    layer.weight.rows()
                )));
            }
            if layer.bias.len() != layer.weight.cols() {
                return Err(Error::Shape(format!(
                    "layer {i} bias length {} does not match width {}",
                    layer.bias.len(),
                    layer.weight.cols()
                )));
            }
            dim = layer.weight.cols();
        }
        Ok(BackboneModel {
            feature_dim: dim,
            layers,
            input_shape,
            frozen,
            train_config_digest,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_shape(&self) -> (usize, usize, usize) {
        self.input_shape
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.0 * self.input_shape.1 * self.input_shape.2
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn frozen(&self) -> bool {
        self.frozen
    }

    pub fn train_config_digest(&self) -> [u8; 32] {
        self.train_config_digest
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Hash of every parameter bit; used to prove the backbone never moves.
    pub fn param_digest(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        for layer in &self.layers {
            hasher.update([match layer.activation {
                Activation::Tanh => 0u8,
                Activation::Linear => 1u8,
            }]);
            for v in layer.weight.data() {
                hasher.update(v.to_le_bytes());
            }
            for v in &layer.bias {
                hasher.update(v.to_le_bytes());
            }
        }
        hasher.finalize().into()
    }

    fn check_frozen(&self) -> Result<()> {
        if !self.frozen {
            return Err(Error::State(
                "backbone must be frozen before features are extracted".into(),
            ));
        }
        Ok(())
    }

    fn check_input(&self, pixels: &[f64]) -> Result<()> {
        if pixels.len() != self.input_len() {
            return Err(Error::Shape(format!(
                "input has {} pixels, model expects {}",
                pixels.len(),
                self.input_len()
            )));
        }
        Ok(())
    }

    /// Forward pass; the frozen check keeps clustering reproducible.
    pub fn extract_feature(&self, pixels: &[f64]) -> Result<Vec<f64>> {
        self.check_frozen()?;
        self.check_input(pixels)?;
        let mut current = pixels.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.forward(&current, &mut next);
            std::mem::swap(&mut current, &mut next);
        }
        Ok(current)
    }

    /// Loss and analytic gradients of a single-sample cross-entropy with
    /// respect to the input pixels and the head. Backbone parameters are
    /// constants here and receive no gradient.
    pub fn input_gradient(
        &self,
        pixels: &[f64],
        head: &ClassifierHead,
        label: usize,
    ) -> Result<InputGradient> {
        self.check_frozen()?;
        self.check_input(pixels)?;
        if head.weight.rows() != self.feature_dim {
            return Err(Error::Shape(format!(
                "head expects {} features, backbone yields {}",
                head.weight.rows(),
                self.feature_dim
            )));
        }
        let acts = forward_collect(&self.layers, pixels);
        let feature = acts.last().expect("at least one layer");
        let logits = head.logits(feature);
        let (loss, d_logits) = softmax_cross_entropy(&logits, label)?;

        let num_classes = head.weight.cols();
        let mut grad_head_weight = Matrix::zeros(self.feature_dim, num_classes);
        for (f, &feat) in feature.iter().enumerate() {
            let row = grad_head_weight.row_mut(f);
            for (g, &d) in row.iter_mut().zip(&d_logits) {
                *g = feat * d;
            }
        }
        let mut d_current: Vec<f64> = (0..self.feature_dim)
            .map(|f| head.weight.row(f).iter().zip(&d_logits).map(|(w, d)| w * d).sum())
            .collect();

        for (l, layer) in self.layers.iter().enumerate().rev() {
            let d_pre = layer.pre_activation_grad(&acts[l + 1], &d_current);
            d_current = layer.input_grad(&d_pre);
        }

        Ok(InputGradient {
            loss,
            grad_pixels: d_current,
            grad_head_weight,
            grad_head_bias: d_logits,
        })
    }
}

fn forward_collect(layers: &[Layer], input: &[f64]) -> Vec<Vec<f64>> {
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(layers.len() + 1);
    acts.push(input.to_vec());
    for layer in layers {
        let mut out = Vec::new();
        layer.forward(acts.last().unwrap(), &mut out);
        acts.push(out);
    }
    acts
}

/// Full backward pass; returns per-layer `(weight grad, bias grad)`.
/// Only pre-training needs parameter gradients for the backbone layers.
fn backward_params(
    layers: &[Layer],
    acts: &[Vec<f64>],
    d_output: Vec<f64>,
    grads: &mut [(Matrix, Vec<f64>)],
) {
    let mut d_current = d_output;
    for (l, layer) in layers.iter().enumerate().rev() {
        let d_pre = layer.pre_activation_grad(&acts[l + 1], &d_current);
        let (gw, gb) = &mut grads[l];
        for (i, &x) in acts[l].iter().enumerate() {
            let row = gw.row_mut(i);
            for (g, &d) in row.iter_mut().zip(&d_pre) {
                *g += x * d;
            }
        }
        for (g, &d) in gb.iter_mut().zip(&d_pre) {
            *g += d;
        }
        d_current = layer.input_grad(&d_pre);
    }
}

fn init_layer(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut RngStream) -> Layer {
    let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
    let data: Vec<f64> = (0..in_dim * out_dim).map(|_| rng.uniform_in(-limit, limit)).collect();
    Layer {
        weight: Matrix::from_vec(in_dim, out_dim, data).expect("sized above"),
        bias: vec![0.0; out_dim],
        activation,
    }
}

/// Trains the backbone on public data with a temporary classification layer,
/// discards that layer, and returns the model frozen.
pub fn pretrain(public: &Dataset, cfg: &TrainConfig) -> Result<(BackboneModel, PretrainReport)> {
    cfg.validate()?;
    if public.is_empty() {
        return Err(Error::Domain("cannot pretrain on an empty dataset".into()));
    }
    if public.num_classes < 2 {
        return Err(Error::Domain("pretraining needs at least 2 public classes".into()));
    }

    let input_dim = public.pixel_count();
    let mut dims: Vec<(usize, usize, Activation)> = Vec::new();
    let mut prev = input_dim;
    for &h in &cfg.hidden_dims {
        dims.push((prev, h, Activation::Tanh));
        prev = h;
    }
    dims.push((prev, cfg.feature_dim, Activation::Linear));
    dims.push((cfg.feature_dim, public.num_classes, Activation::Linear));

    let mut layers: Vec<Layer> = dims
        .iter()
        .enumerate()
        .map(|(l, &(i, o, a))| {
            let mut rng = RngStream::new(cfg.seed, stream_id(domain::PRETRAIN_INIT, l as u64));
            init_layer(i, o, a, &mut rng)
        })
        .collect();

    let n = public.len();
    let mut grads: Vec<(Matrix, Vec<f64>)> = layers
        .iter()
        .map(|l| (Matrix::zeros(l.weight.rows(), l.weight.cols()), vec![0.0; l.bias.len()]))
        .collect();
    let mut epoch_mean_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut order_rng = RngStream::new(cfg.seed, stream_id(domain::PRETRAIN_ORDER, epoch as u64));
        let order = order_rng.permutation(n);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            for (gw, gb) in grads.iter_mut() {
                gw.data_mut().fill(0.0);
                gb.fill(0.0);
            }
            for &idx in batch {
                let img = &public.images[idx];
                let acts = forward_collect(&layers, &img.pixels);
                let (loss, d_logits) = softmax_cross_entropy(acts.last().unwrap(), img.label)?;
                if !loss.is_finite() {
                    return Err(Error::Numeric(format!(
                        "pretraining diverged at epoch {epoch}"
                    )));
                }
                loss_sum += loss;
                backward_params(&layers, &acts, d_logits, &mut grads);
            }
            let scale = cfg.learning_rate / batch.len() as f64;
            for (layer, (gw, gb)) in layers.iter_mut().zip(&grads) {
                layer.weight.sub_scaled(gw, scale);
                for (b, g) in layer.bias.iter_mut().zip(gb) {
                    *b -= scale * g;
                }
            }
        }
        epoch_mean_losses.push(loss_sum / n as f64);
    }

    // Final training accuracy with the temporary head still attached.
    let mut correct = 0usize;
    {
        let mut current = Vec::new();
        let mut next = Vec::new();
        for img in &public.images {
            current.clear();
            current.extend_from_slice(&img.pixels);
            for layer in &layers {
                layer.forward(&current, &mut next);
                std::mem::swap(&mut current, &mut next);
            }
            let pred = argmax(&current);
            if pred == img.label {
                correct += 1;
            }
        }
    }
    let report = PretrainReport {
        final_train_accuracy: correct as f64 / n as f64,
        epoch_mean_losses,
    };

    layers.pop(); // discard the temporary classification layer
    let model = BackboneModel::from_parts(layers, public.shape, true, cfg.digest())?;
    Ok((model, report))
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
