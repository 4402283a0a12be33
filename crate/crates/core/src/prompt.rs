//! Pixel-frame prompts and per-cluster prompt/head tuning.
//!
//! A prompt is an additive perturbation confined to a border band of the
//! image; the interior stays exactly zero at all times, including through
//! optimizer steps. Each cluster owns one prompt plus one classifier head,
//! initialized from a stream keyed by `(global_seed, cluster_id)` and tuned
//! by plain SGD with a batch order drawn from its own seed. That is the
//! entire mutable state of the system, which is what makes unlearning a
//! cluster both cheap and exactly reproducible.

use std::collections::BTreeMap;

use crate::backbone::{argmax, BackboneModel};
use crate::cluster::{assign_to_nearest, ClusterModel};
use crate::data::{Dataset, LabeledImage};
use crate::error::{Error, Result};
use crate::num::{FeatureVector, Matrix};
use crate::rng::{derive_seed, domain, stream_id, RngStream};

/// Additive image perturbation that is nonzero only on a border band of
/// width `frame_width`.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelFramePrompt {
    pub values: Vec<f64>,
    pub shape: (usize, usize, usize),
    pub frame_width: usize,
    pub cluster_id: usize,
}

impl PixelFramePrompt {
    /// True when `(row, col)` lies strictly inside the frame band.
    #[inline]
    pub fn is_interior(shape: (usize, usize, usize), frame_width: usize, row: usize, col: usize) -> bool {
        let (h, w, _) = shape;
        row >= frame_width && row < h - frame_width && col >= frame_width && col < w - frame_width
    }

    /// Number of tunable values: frame positions times channels.
    pub fn frame_value_count(shape: (usize, usize, usize), frame_width: usize) -> usize {
        let (h, w, c) = shape;
        let inner_h = h.saturating_sub(2 * frame_width);
        let inner_w = w.saturating_sub(2 * frame_width);
        (h * w - inner_h * inner_w) * c
    }

    /// Flat mask over pixels, true where the prompt may be nonzero.
    pub fn frame_mask(shape: (usize, usize, usize), frame_width: usize) -> Vec<bool> {
        let (h, w, c) = shape;
        let mut mask = Vec::with_capacity(h * w * c);
        for row in 0..h {
            for col in 0..w {
                let frame = !Self::is_interior(shape, frame_width, row, col);
                for _ in 0..c {
                    mask.push(frame);
                }
            }
        }
        mask
    }

    pub fn validate(&self) -> Result<()> {
        let (h, w, c) = self.shape;
        if 2 * self.frame_width > h.min(w) {
            return Err(Error::Domain(format!(
                "frame width {} too large for {h}x{w} images",
                self.frame_width
            )));
        }
        if self.values.len() != h * w * c {
            return Err(Error::Shape(format!(
                "prompt has {} values, expected {}",
                self.values.len(),
                h * w * c
            )));
        }
        let mask = Self::frame_mask(self.shape, self.frame_width);
        for (i, (&v, &in_frame)) in self.values.iter().zip(&mask).enumerate() {
            if !v.is_finite() {
                return Err(Error::Numeric(format!("non-finite prompt value at {i}")));
            }
            if !in_frame && v != 0.0 {
                return Err(Error::State(format!("interior prompt value {v} at {i}")));
            }
        }
        Ok(())
    }
}

/// Linear classification head mapping features to class logits. The weight
/// is `feature_dim x num_classes`; all heads share the private label space.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub cluster_id: usize,
}

impl ClassifierHead {
    pub fn num_classes(&self) -> usize {
        self.weight.cols()
    }

    pub fn logits(&self, feature: &[f64]) -> Vec<f64> {
        let mut out = self.bias.clone();
        for (f, &x) in feature.iter().enumerate() {
            for (o, &w) in out.iter_mut().zip(self.weight.row(f)) {
                *o += x * w;
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.weight.rows() * self.weight.cols() + self.bias.len()
    }
}

/// The only retrainable parameters of a cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptHeadPair {
    pub prompt: PixelFramePrompt,
    pub head: ClassifierHead,
    pub tune_log: Vec<(usize, f64)>,
    pub init_seed: u64,
}

impl PromptHeadPair {
    pub fn param_count(&self) -> usize {
        PixelFramePrompt::frame_value_count(self.prompt.shape, self.prompt.frame_width)
            + self.head.param_count()
    }
}

/// Hyperparameters for per-cluster tuning.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneConfig {
    pub prompt_lr: f64,
    pub head_lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub frame_width: usize,
}

impl TuneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.prompt_lr < 0.0 || self.head_lr < 0.0 {
            return Err(Error::Domain("learning rates must be non-negative".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Domain("tune epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Domain("tune batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Default frame width for a given image height: the reference 30-pixel band
/// on 224-pixel inputs, scaled down and clamped to at least one pixel.
pub fn default_frame_width(height: usize) -> usize {
    ((height as f64 * 30.0 / 224.0).round() as usize).max(1)
}

/// Overlays a prompt onto an image: `clamp(x + p, 0, 1)`. Interior pixels
/// come through bit-identical because the prompt is zero there.
pub fn overlay(pixels: &[f64], prompt: &PixelFramePrompt) -> Result<Vec<f64>> {
    let expected = prompt.shape.0 * prompt.shape.1 * prompt.shape.2;
    if pixels.len() != expected || prompt.values.len() != expected {
        return Err(Error::Shape(format!(
            "overlay shapes differ: image {} vs prompt {expected}",
            pixels.len()
        )));
    }
    Ok(pixels
        .iter()
        .zip(&prompt.values)
        .map(|(&x, &p)| (x + p).clamp(0.0, 1.0))
        .collect())
}

/// Fresh prompt/head pair for a cluster: frame values and head weights are
/// i.i.d. uniform in [-0.05, 0.05] from the cluster's own stream, biases and
/// interior are zero. Deterministic in `(global_seed, cluster_id)`.
pub fn init_pair(
    cluster_id: usize,
    shape: (usize, usize, usize),
    feature_dim: usize,
    num_classes: usize,
    frame_width: usize,
    global_seed: u64,
) -> Result<PromptHeadPair> {
    let (h, w, c) = shape;
    if 2 * frame_width > h.min(w) {
        return Err(Error::Domain(format!(
            "frame width {frame_width} too large for {h}x{w} images"
        )));
    }
    if num_classes < 2 {
        return Err(Error::Domain("need at least 2 classes".into()));
    }
    let mut rng = RngStream::new(global_seed, stream_id(domain::PROMPT_INIT, cluster_id as u64));
    let mut values = Vec::with_capacity(h * w * c);
    for row in 0..h {
        for col in 0..w {
            for _ in 0..c {
                if PixelFramePrompt::is_interior(shape, frame_width, row, col) {
                    values.push(0.0);
                } else {
                    values.push(rng.uniform_in(-0.05, 0.05));
                }
            }
        }
    }
    let prompt = PixelFramePrompt { values, shape, frame_width, cluster_id };
    prompt.validate()?;
    let weight_data: Vec<f64> = (0..feature_dim * num_classes)
        .map(|_| rng.uniform_in(-0.05, 0.05))
        .collect();
    Ok(PromptHeadPair {
        prompt,
        head: ClassifierHead {
            weight: Matrix::from_vec(feature_dim, num_classes, weight_data)?,
            bias: vec![0.0; num_classes],
            cluster_id,
        },
        tune_log: Vec::new(),
        init_seed: global_seed,
    })
}

/// Jointly tunes a prompt and head on one cluster's data by mini-batch SGD.
/// The prompt gradient is masked to the frame band, with a zeroed gradient
/// wherever the overlay clamp is active.
pub fn tune_pair(
    cluster_data: &[&LabeledImage],
    model: &BackboneModel,
    pair: &PromptHeadPair,
    cfg: &TuneConfig,
    data_order_seed: u64,
) -> Result<PromptHeadPair> {
    tune_pair_traced(cluster_data, model, pair, cfg, data_order_seed, |_, _| {})
}

/// [`tune_pair`] with a per-epoch observer, used to record accuracy curves.
pub fn tune_pair_traced<F>(
    cluster_data: &[&LabeledImage],
    model: &BackboneModel,
    pair: &PromptHeadPair,
    cfg: &TuneConfig,
    data_order_seed: u64,
    mut on_epoch: F,
) -> Result<PromptHeadPair>
where
    F: FnMut(usize, &PromptHeadPair),
{
    cfg.validate()?;
    if cluster_data.is_empty() {
        return Err(Error::Domain("cannot tune on an empty cluster".into()));
    }
    if !model.frozen() {
        return Err(Error::State("tuning requires a frozen backbone".into()));
    }
    let pixel_count = model.input_len();
    if pair.prompt.values.len() != pixel_count {
        return Err(Error::Shape("prompt does not match the backbone input".into()));
    }
    for img in cluster_data {
        if img.pixels.len() != pixel_count {
            return Err(Error::Shape(format!("image {} does not match the backbone input", img.id)));
        }
    }

    let mask = PixelFramePrompt::frame_mask(pair.prompt.shape, pair.prompt.frame_width);
    let mut tuned = pair.clone();
    tuned.tune_log = Vec::with_capacity(cfg.epochs);
    let n = cluster_data.len();
    let feature_dim = model.feature_dim();
    let num_classes = tuned.head.num_classes();

    let mut grad_prompt = vec![0.0; pixel_count];
    let mut grad_weight = Matrix::zeros(feature_dim, num_classes);
    let mut grad_bias = vec![0.0; num_classes];

    for epoch in 0..cfg.epochs {
        let mut order_rng = RngStream::new(data_order_seed, epoch as u64);
        let order = order_rng.permutation(n);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad_prompt.fill(0.0);
            grad_weight.data_mut().fill(0.0);
            grad_bias.fill(0.0);
            for &idx in batch {
                let img = cluster_data[idx];
                let prompted = overlay(&img.pixels, &tuned.prompt)?;
                let ig = model.input_gradient(&prompted, &tuned.head, img.label)?;
                if !ig.loss.is_finite() {
                    return Err(Error::Numeric(format!("tuning diverged at epoch {epoch}")));
                }
                loss_sum += ig.loss;
                for i in 0..pixel_count {
                    if !mask[i] {
                        continue;
                    }
                    let raw = img.pixels[i] + tuned.prompt.values[i];
                    if (0.0..=1.0).contains(&raw) {
                        grad_prompt[i] += ig.grad_pixels[i];
                    }
                }
                grad_weight.add_assign(&ig.grad_head_weight);
                for (g, d) in grad_bias.iter_mut().zip(&ig.grad_head_bias) {
                    *g += d;
                }
            }
            let inv = 1.0 / batch.len() as f64;
            for i in 0..pixel_count {
                if mask[i] {
                    tuned.prompt.values[i] -= cfg.prompt_lr * inv * grad_prompt[i];
                }
            }
            tuned.head.weight.sub_scaled(&grad_weight, cfg.head_lr * inv);
            for (b, g) in tuned.head.bias.iter_mut().zip(&grad_bias) {
                *b -= cfg.head_lr * inv * g;
            }
        }
        tuned.tune_log.push((epoch, loss_sum / n as f64));
        on_epoch(epoch, &tuned);
    }
    Ok(tuned)
}

fn members_in_id_order<'a>(
    clusters: &ClusterModel,
    private: &'a Dataset,
) -> Result<Vec<Vec<&'a LabeledImage>>> {
    clusters.validate(private)?;
    clusters
        .clusters
        .iter()
        .map(|c| {
            c.member_ids
                .iter()
                .map(|id| {
                    private
                        .get(*id)
                        .ok_or_else(|| Error::NotFound(format!("cluster member {id} missing")))
                })
                .collect()
        })
        .collect()
}

/// Tunes one pair per cluster. Each cluster draws from its own streams, so
/// the result is identical whether clusters run serially or across workers.
pub fn tune_all(
    clusters: &ClusterModel,
    private: &Dataset,
    model: &BackboneModel,
    cfg: &TuneConfig,
    global_seed: u64,
    threads: usize,
) -> Result<Vec<PromptHeadPair>> {
    let members = members_in_id_order(clusters, private)?;
    let shape = private.shape;
    let feature_dim = model.feature_dim();
    let num_classes = private.num_classes;

    let tune_one = |k: usize, data: &[&LabeledImage]| -> Result<PromptHeadPair> {
        let pair = init_pair(k, shape, feature_dim, num_classes, cfg.frame_width, global_seed)?;
        tune_pair(data, model, &pair, cfg, derive_seed(global_seed, domain::TUNE_ORDER, k as u64))
            .map_err(|e| e.tag(&format!("cluster {k}")))
    };

    let workers = threads.max(1).min(members.len().max(1));
    if workers <= 1 {
        return members
            .iter()
            .enumerate()
            .map(|(k, data)| tune_one(k, data))
            .collect();
    }

    let mut slots: Vec<Option<Result<PromptHeadPair>>> = Vec::new();
    slots.resize_with(members.len(), || None);
    let slots = std::sync::Mutex::new(slots);
    std::thread::scope(|scope| {
        for worker in 0..workers {
            let slots = &slots;
            let members = &members;
            let tune_one = &tune_one;
            scope.spawn(move || {
                for k in (worker..members.len()).step_by(workers) {
                    let result = tune_one(k, &members[k]);
                    slots.lock().expect("worker panicked").get_mut(k).map(|s| *s = Some(result));
                }
            });
        }
    });
    slots
        .into_inner()
        .expect("workers joined")
        .into_iter()
        .map(|s| s.expect("every cluster visited"))
        .collect()
}

/// Per-epoch snapshots of every pair, tuned serially; used by the
/// comparison command to plot accuracy curves.
pub fn tune_all_snapshots(
    clusters: &ClusterModel,
    private: &Dataset,
    model: &BackboneModel,
    cfg: &TuneConfig,
    global_seed: u64,
) -> Result<(Vec<PromptHeadPair>, Vec<Vec<PromptHeadPair>>)> {
    let members = members_in_id_order(clusters, private)?;
    let mut snapshots: Vec<Vec<PromptHeadPair>> = vec![Vec::new(); cfg.epochs];
    let mut pairs = Vec::with_capacity(members.len());
    for (k, data) in members.iter().enumerate() {
        let init = init_pair(
            k,
            private.shape,
            model.feature_dim(),
            private.num_classes,
            cfg.frame_width,
            global_seed,
        )?;
        let pair = tune_pair_traced(
            data,
            model,
            &init,
            cfg,
            derive_seed(global_seed, domain::TUNE_ORDER, k as u64),
            |epoch, snapshot| snapshots[epoch].push(snapshot.clone()),
        )?;
        pairs.push(pair);
    }
    Ok((pairs, snapshots))
}

/// A routed prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: usize,
    pub cluster_id: usize,
    pub logits: Vec<f64>,
}

/// Predicts with the nearest cluster's prompt: route on the raw image's
/// feature, overlay that cluster's prompt, classify with its head.
pub fn predict(
    pixels: &[f64],
    model: &BackboneModel,
    clusters: &ClusterModel,
    pairs: &[PromptHeadPair],
) -> Result<Prediction> {
    if pairs.is_empty() || clusters.clusters.is_empty() {
        return Err(Error::Domain("prediction needs at least one cluster and pair".into()));
    }
    if pairs.len() != clusters.clusters.len() {
        return Err(Error::State(format!(
            "{} pairs for {} clusters",
            pairs.len(),
            clusters.clusters.len()
        )));
    }
    let raw_feature = model.extract_feature(pixels)?;
    let prototypes = clusters.prototypes();
    let k = assign_to_nearest(&raw_feature, &prototypes)?;
    let prompted = overlay(pixels, &pairs[k].prompt)?;
    let feature = model.extract_feature(&prompted)?;
    let logits = pairs[k].head.logits(&feature);
    Ok(Prediction { label: argmax(&logits), cluster_id: k, logits })
}

/// Lookup table from private id to cluster id.
pub fn membership_index(clusters: &ClusterModel) -> BTreeMap<u64, usize> {
    let mut index = BTreeMap::new();
    for c in &clusters.clusters {
        for id in &c.member_ids {
            index.insert(*id, c.cluster_id);
        }
    }
    index
}

/// Nearest-prototype feature routing for a raw image.
pub fn route(pixels: &[f64], model: &BackboneModel, clusters: &ClusterModel) -> Result<usize> {
    let feature: FeatureVector = model.extract_feature(pixels)?;
    assign_to_nearest(&feature, &clusters.prototypes())
}
