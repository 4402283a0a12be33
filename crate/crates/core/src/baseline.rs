//! Reference systems the clustered-prompt engine is compared against:
//! a single prompt for all private data, uniformly random partitioning at a
//! matched cluster count, and per-cluster prompts behind one shared head.
//! Each mirrors the cost/accuracy role of an external system while staying
//! inside the same deterministic machinery.

use std::collections::BTreeSet;
use std::time::Instant;

use crate::backbone::{argmax, BackboneModel};
use crate::cluster::{compute_prototype, Cluster, ClusterModel};
use crate::data::{Dataset, LabeledImage};
use crate::error::{Error, Result};
use crate::num::{FeatureVector, Matrix};
use crate::prompt::{
    init_pair, membership_index, overlay, route, tune_all, tune_pair, tune_pair_traced,
    ClassifierHead, PixelFramePrompt, PromptHeadPair, TuneConfig,
};
use crate::rng::{derive_seed, domain, stream_id, RngStream};
use crate::unlearn::{evaluate_with, EraserConfig, EraserState, Evaluation};

/// Headline numbers recorded when a baseline is trained.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineMetrics {
    pub train_accuracy: f64,
    /// Parameters a single-point unlearning request would retrain.
    pub retrain_params_per_request: usize,
    /// Data points the worst single-point request would retrain on.
    pub worst_case_retrain_data: usize,
}

/// Cost report for a baseline unlearning request.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineUnlearnReport {
    pub removed_ids: BTreeSet<u64>,
    pub retrained_param_count: usize,
    pub retrained_data_count: usize,
    pub elapsed_seconds: f64,
}

// ---------------------------------------------------------------------------
// Single prompt
// ---------------------------------------------------------------------------

fn all_images(private: &Dataset) -> Vec<&LabeledImage> {
    private.images.iter().collect()
}

fn train_single_pair(
    private: &Dataset,
    model: &BackboneModel,
    cfg: &TuneConfig,
    global_seed: u64,
) -> Result<PromptHeadPair> {
    let pair = init_pair(
        0,
        private.shape,
        model.feature_dim(),
        private.num_classes,
        cfg.frame_width,
        global_seed,
    )?;
    tune_pair(
        &all_images(private),
        model,
        &pair,
        cfg,
        derive_seed(global_seed, domain::TUNE_ORDER, 0),
    )
}

/// One prompt and head for the entire private dataset.
pub fn baseline_single_prompt(
    private: &Dataset,
    model: &BackboneModel,
    cfg: &TuneConfig,
    global_seed: u64,
) -> Result<(PromptHeadPair, BaselineMetrics)> {
    let pair = train_single_pair(private, model, cfg, global_seed)?;
    let train_accuracy = single_prompt_evaluate(model, &pair, private)?.accuracy;
    let metrics = BaselineMetrics {
        train_accuracy,
        retrain_params_per_request: pair.param_count(),
        worst_case_retrain_data: private.len().saturating_sub(1),
    };
    Ok((pair, metrics))
}

/// [`baseline_single_prompt`] with a per-epoch observer for accuracy curves.
pub fn baseline_single_prompt_traced<F>(
    private: &Dataset,
    model: &BackboneModel,
    cfg: &TuneConfig,
    global_seed: u64,
    on_epoch: F,
) -> Result<PromptHeadPair>
where
    F: FnMut(usize, &PromptHeadPair),
{
    let pair = init_pair(
        0,
        private.shape,
        model.feature_dim(),
        private.num_classes,
        cfg.frame_width,
        global_seed,
    )?;
    tune_pair_traced(
        &all_images(private),
        model,
        &pair,
        cfg,
        derive_seed(global_seed, domain::TUNE_ORDER, 0),
        on_epoch,
    )
}

pub fn single_prompt_predict(
    pixels: &[f64],
    model: &BackboneModel,
    pair: &PromptHeadPair,
) -> Result<usize> {
    let prompted = overlay(pixels, &pair.prompt)?;
    let feature = model.extract_feature(&prompted)?;
    Ok(argmax(&pair.head.logits(&feature)))
}

pub fn single_prompt_evaluate(
    model: &BackboneModel,
    pair: &PromptHeadPair,
    test: &Dataset,
) -> Result<Evaluation> {
    if test.num_classes != pair.head.num_classes() {
        return Err(Error::Domain(format!(
            "test has {} classes, head has {}",
            test.num_classes,
            pair.head.num_classes()
        )));
    }
    evaluate_with(test, |img| single_prompt_predict(&img.pixels, model, pair))
}

/// Unlearning for the single-prompt baseline: the one pair is retrained from
/// its pinned seed on everything that survives.
pub fn single_prompt_unlearn(
    private: &Dataset,
    model: &BackboneModel,
    cfg: &TuneConfig,
    global_seed: u64,
    removed: &BTreeSet<u64>,
) -> Result<(PromptHeadPair, Dataset, BaselineUnlearnReport)> {
    let start = Instant::now();
    let survivors = private.remove_points(removed)?;
    if survivors.is_empty() {
        return Err(Error::Domain("removal leaves no private data".into()));
    }
    let pair = train_single_pair(&survivors, model, cfg, global_seed)?;
    let report = BaselineUnlearnReport {
        removed_ids: removed.clone(),
        retrained_param_count: pair.param_count(),
        retrained_data_count: survivors.len(),
        elapsed_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((pair, survivors, report))
}

// ---------------------------------------------------------------------------
// Random partition at a matched cluster count
// ---------------------------------------------------------------------------

/// Splits the private ids into `k` seeded uniform groups (sizes differ by at
/// most one) and wraps them as a cluster model with mean-feature prototypes
/// so routing and unlearning work exactly as in the adaptive system.
pub fn random_partition_clusters(
    private: &Dataset,
    model: &BackboneModel,
    k: usize,
    threshold: f64,
    global_seed: u64,
) -> Result<ClusterModel> {
    if k == 0 || k > private.len() {
        return Err(Error::Domain(format!(
            "cannot split {} points into {k} groups",
            private.len()
        )));
    }
    let mut ids: Vec<u64> = private.images.iter().map(|i| i.id).collect();
    let mut rng = RngStream::new(global_seed, stream_id(domain::RANDOM_GROUPS, 0));
    rng.shuffle(&mut ids);

    let n = ids.len();
    let base = n / k;
    let extra = n % k;
    let mut groups: Vec<BTreeSet<u64>> = Vec::with_capacity(k);
    let mut cursor = 0usize;
    for g in 0..k {
        let size = base + usize::from(g < extra);
        groups.push(ids[cursor..cursor + size].iter().cloned().collect());
        cursor += size;
    }
    groups.sort_by_key(|g| *g.first().expect("groups are non-empty"));

    let mut clusters = Vec::with_capacity(k);
    for (cluster_id, member_ids) in groups.into_iter().enumerate() {
        let features: Vec<FeatureVector> = member_ids
            .iter()
            .map(|id| model.extract_feature(&private.get(*id).expect("own id").pixels))
            .collect::<Result<_>>()?;
        clusters.push(Cluster {
            cluster_id,
            member_ids,
            sampled_member_ids: BTreeSet::new(),
            prototype: compute_prototype(&features)?,
        });
    }
    Ok(ClusterModel {
        clusters,
        threshold,
        sample_ids: BTreeSet::new(),
        sample_size: 0,
        seed: global_seed,
    })
}

/// Random grouping with the full tune/unlearn machinery of the main system.
pub fn baseline_random_partition(
    private: &Dataset,
    model: &BackboneModel,
    k: usize,
    config: &EraserConfig,
    global_seed: u64,
    threads: usize,
) -> Result<(EraserState, BaselineMetrics)> {
    let clusters = random_partition_clusters(private, model, k, config.threshold, global_seed)?;
    let pairs = tune_all(&clusters, private, model, &config.tune, global_seed, threads)?;
    let worst = clusters.clusters.iter().map(|c| c.member_ids.len()).max().unwrap_or(1) - 1;
    let state = EraserState {
        backbone: model.clone(),
        clusters,
        pairs,
        private: private.clone(),
        config: config.clone(),
        global_seed,
        version: 1,
    };
    let train_accuracy = crate::unlearn::evaluate_state(&state, private)?.accuracy;
    let metrics = BaselineMetrics {
        train_accuracy,
        retrain_params_per_request: state.pair_param_count(),
        worst_case_retrain_data: worst,
    };
    Ok((state, metrics))
}

// ---------------------------------------------------------------------------
// Shared classifier head
// ---------------------------------------------------------------------------

/// Per-cluster prompts routed as usual, but classified by one head that was
/// trained on all prompted private data.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedHeadModel {
    pub prompts: Vec<PixelFramePrompt>,
    pub head: ClassifierHead,
    pub clusters: ClusterModel,
    pub epoch_losses: Vec<f64>,
}

fn init_shared_head(
    feature_dim: usize,
    num_classes: usize,
    global_seed: u64,
) -> Result<ClassifierHead> {
    let mut rng = RngStream::new(global_seed, stream_id(domain::SHARED_HEAD_INIT, 0));
    let data: Vec<f64> = (0..feature_dim * num_classes)
        .map(|_| rng.uniform_in(-0.05, 0.05))
        .collect();
    Ok(ClassifierHead {
        weight: Matrix::from_vec(feature_dim, num_classes, data)?,
        bias: vec![0.0; num_classes],
        cluster_id: 0,
    })
}

/// Joint SGD over all private data: the head accumulates gradients from
/// every sample, each updatable prompt only from its own cluster's samples.
#[allow(clippy::too_many_arguments)]
fn shared_head_fit<F>(
    private: &Dataset,
    model: &BackboneModel,
    clusters: &ClusterModel,
    cfg: &TuneConfig,
    global_seed: u64,
    mut prompts: Vec<PixelFramePrompt>,
    updatable: &BTreeSet<usize>,
    mut on_epoch: F,
) -> Result<(Vec<PixelFramePrompt>, ClassifierHead, Vec<f64>)>
where
    F: FnMut(usize, &[PixelFramePrompt], &ClassifierHead),
{
    cfg.validate()?;
    clusters.validate(private)?;
    let membership = membership_index(clusters);
    let mask = PixelFramePrompt::frame_mask(private.shape, cfg.frame_width);
    let pixel_count = private.pixel_count();
    let mut head = init_shared_head(model.feature_dim(), private.num_classes, global_seed)?;
    let order_seed = derive_seed(global_seed, domain::SHARED_HEAD_ORDER, 0);

    let n = private.len();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut grad_head = Matrix::zeros(model.feature_dim(), private.num_classes);
    let mut grad_bias = vec![0.0; private.num_classes];
    let mut grad_prompts: Vec<Vec<f64>> =
        prompts.iter().map(|_| vec![0.0; pixel_count]).collect();

    for epoch in 0..cfg.epochs {
        let mut order_rng = RngStream::new(order_seed, epoch as u64);
        let order = order_rng.permutation(n);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad_head.data_mut().fill(0.0);
            grad_bias.fill(0.0);
            let mut touched: BTreeSet<usize> = BTreeSet::new();
            for &idx in batch {
                let img = &private.images[idx];
                let k = *membership.get(&img.id).expect("validated coverage");
                let prompted = overlay(&img.pixels, &prompts[k])?;
                let ig = model.input_gradient(&prompted, &head, img.label)?;
                if !ig.loss.is_finite() {
                    return Err(Error::Numeric(format!(
                        "shared-head tuning diverged at epoch {epoch}"
                    )));
                }
                loss_sum += ig.loss;
                grad_head.add_assign(&ig.grad_head_weight);
                for (g, d) in grad_bias.iter_mut().zip(&ig.grad_head_bias) {
                    *g += d;
                }
                if updatable.contains(&k) {
                    if touched.insert(k) {
                        grad_prompts[k].fill(0.0);
                    }
                    for i in 0..pixel_count {
                        if !mask[i] {
                            continue;
                        }
                        let raw = img.pixels[i] + prompts[k].values[i];
                        if (0.0..=1.0).contains(&raw) {
                            grad_prompts[k][i] += ig.grad_pixels[i];
                        }
                    }
                }
            }
            let inv = 1.0 / batch.len() as f64;
            head.weight.sub_scaled(&grad_head, cfg.head_lr * inv);
            for (b, g) in head.bias.iter_mut().zip(&grad_bias) {
                *b -= cfg.head_lr * inv * g;
            }
            for &k in &touched {
                for i in 0..pixel_count {
                    if mask[i] {
                        prompts[k].values[i] -= cfg.prompt_lr * inv * grad_prompts[k][i];
                    }
                }
            }
        }
        epoch_losses.push(loss_sum / n as f64);
        on_epoch(epoch, &prompts, &head);
    }
    Ok((prompts, head, epoch_losses))
}

fn fresh_prompts(
    clusters: &ClusterModel,
    shape: (usize, usize, usize),
    feature_dim: usize,
    num_classes: usize,
    frame_width: usize,
    global_seed: u64,
) -> Result<Vec<PixelFramePrompt>> {
    clusters
        .clusters
        .iter()
        .map(|c| {
            init_pair(c.cluster_id, shape, feature_dim, num_classes, frame_width, global_seed)
                .map(|p| p.prompt)
        })
        .collect()
}

/// Trains the shared-head baseline on the given clustering. With a single
/// cluster this reduces to the single-prompt baseline, bit for bit.
pub fn baseline_shared_head(
    private: &Dataset,
    model: &BackboneModel,
    clusters: &ClusterModel,
    cfg: &TuneConfig,
    global_seed: u64,
) -> Result<(SharedHeadModel, BaselineMetrics)> {
    let shared = baseline_shared_head_traced(private, model, clusters, cfg, global_seed, |_, _| {})?;
    let train_accuracy = shared_head_evaluate(model, &shared, private)?.accuracy;
    let frame = PixelFramePrompt::frame_value_count(private.shape, cfg.frame_width);
    let metrics = BaselineMetrics {
        train_accuracy,
        retrain_params_per_request: shared.head.param_count() + frame,
        worst_case_retrain_data: private.len().saturating_sub(1),
    };
    Ok((shared, metrics))
}

/// [`baseline_shared_head`] with a per-epoch observer.
pub fn baseline_shared_head_traced<F>(
    private: &Dataset,
    model: &BackboneModel,
    clusters: &ClusterModel,
    cfg: &TuneConfig,
    global_seed: u64,
    mut on_epoch: F,
) -> Result<SharedHeadModel>
where
    F: FnMut(usize, &SharedHeadModel),
{
    if clusters.num_clusters() == 1 {
        let pair = tune_pair_traced(
            &all_images(private),
            model,
            &init_pair(
                0,
                private.shape,
                model.feature_dim(),
                private.num_classes,
                cfg.frame_width,
                global_seed,
            )?,
            cfg,
            derive_seed(global_seed, domain::TUNE_ORDER, 0),
            |_, _| {},
        )?;
        let shared = SharedHeadModel {
            prompts: vec![pair.prompt],
            head: pair.head,
            clusters: clusters.clone(),
            epoch_losses: pair.tune_log.iter().map(|(_, l)| *l).collect(),
        };
        on_epoch(cfg.epochs - 1, &shared);
        return Ok(shared);
    }
    let prompts = fresh_prompts(
        clusters,
        private.shape,
        model.feature_dim(),
        private.num_classes,
        cfg.frame_width,
        global_seed,
    )?;
    let updatable: BTreeSet<usize> = (0..clusters.num_clusters()).collect();
    let mut snapshot_hook = |epoch: usize, prompts: &[PixelFramePrompt], head: &ClassifierHead| {
        let snapshot = SharedHeadModel {
            prompts: prompts.to_vec(),
            head: head.clone(),
            clusters: clusters.clone(),
            epoch_losses: Vec::new(),
        };
        on_epoch(epoch, &snapshot);
    };
    let (prompts, head, epoch_losses) = shared_head_fit(
        private,
        model,
        clusters,
        cfg,
        global_seed,
        prompts,
        &updatable,
        &mut snapshot_hook,
    )?;
    Ok(SharedHeadModel { prompts, head, clusters: clusters.clone(), epoch_losses })
}

pub fn shared_head_predict(
    pixels: &[f64],
    model: &BackboneModel,
    shared: &SharedHeadModel,
) -> Result<usize> {
    let k = route(pixels, model, &shared.clusters)?;
    let prompted = overlay(pixels, &shared.prompts[k])?;
    let feature = model.extract_feature(&prompted)?;
    Ok(argmax(&shared.head.logits(&feature)))
}

pub fn shared_head_evaluate(
    model: &BackboneModel,
    shared: &SharedHeadModel,
    test: &Dataset,
) -> Result<Evaluation> {
    if test.num_classes != shared.head.num_classes() {
        return Err(Error::Domain(format!(
            "test has {} classes, head has {}",
            test.num_classes,
            shared.head.num_classes()
        )));
    }
    evaluate_with(test, |img| shared_head_predict(&img.pixels, model, shared))
}

/// Shared-head unlearning: membership shrinks locally, but the shared head
/// must retrain on *all* surviving private data, plus the affected prompts.
pub fn shared_head_unlearn(
    shared: &SharedHeadModel,
    private: &Dataset,
    model: &BackboneModel,
    cfg: &TuneConfig,
    global_seed: u64,
    removed: &BTreeSet<u64>,
) -> Result<(SharedHeadModel, Dataset, BaselineUnlearnReport)> {
    let start = Instant::now();
    let membership = membership_index(&shared.clusters);
    let mut affected: BTreeSet<usize> = BTreeSet::new();
    for id in removed {
        let k = membership
            .get(id)
            .ok_or_else(|| Error::NotFound(format!("id {id} is not in the private dataset")))?;
        affected.insert(*k);
    }
    let mut clusters = shared.clusters.clone();
    for cluster in &mut clusters.clusters {
        for id in removed {
            cluster.member_ids.remove(id);
            cluster.sampled_member_ids.remove(id);
        }
        if cluster.member_ids.is_empty() {
            return Err(Error::ClusterCollapse { cluster_id: cluster.cluster_id });
        }
    }
    clusters.sample_ids = clusters.sample_ids.difference(removed).cloned().collect();
    clusters.sample_size = clusters.sample_ids.len();
    let survivors = private.remove_points(removed)?;

    if clusters.num_clusters() == 1 {
        let (pair, survivors, mut report) =
            single_prompt_unlearn(private, model, cfg, global_seed, removed)?;
        report.elapsed_seconds = start.elapsed().as_secs_f64();
        let next = SharedHeadModel {
            prompts: vec![pair.prompt],
            head: pair.head,
            clusters,
            epoch_losses: pair.tune_log.iter().map(|(_, l)| *l).collect(),
        };
        return Ok((next, survivors, report));
    }

    let mut prompts = shared.prompts.clone();
    for &k in &affected {
        prompts[k] = init_pair(
            k,
            private.shape,
            model.feature_dim(),
            private.num_classes,
            cfg.frame_width,
            global_seed,
        )?
        .prompt;
    }
    let (prompts, head, epoch_losses) = shared_head_fit(
        &survivors,
        model,
        &clusters,
        cfg,
        global_seed,
        prompts,
        &affected,
        |_, _, _| {},
    )?;
    let frame = PixelFramePrompt::frame_value_count(private.shape, cfg.frame_width);
    let report = BaselineUnlearnReport {
        removed_ids: removed.clone(),
        retrained_param_count: head.param_count() + affected.len() * frame,
        retrained_data_count: survivors.len(),
        elapsed_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((SharedHeadModel { prompts, head, clusters, epoch_losses }, survivors, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbone::{pretrain, TrainConfig};
    use crate::unlearn::unlearn;

    fn fixture() -> (Dataset, BackboneModel, EraserConfig) {
        let source = crate::data::generate_synthetic(4, 40, (4, 4, 1), 0.08, 90).unwrap();
        let partition = source.partition(0.5, 90).unwrap();
        let config = EraserConfig {
            train: TrainConfig {
                learning_rate: 0.1,
                epochs: 6,
                batch_size: 16,
                seed: 17,
                hidden_dims: vec![16],
                feature_dim: 8,
            },
            tune: TuneConfig {
                prompt_lr: 0.1,
                head_lr: 0.2,
                epochs: 4,
                batch_size: 8,
                frame_width: 1,
            },
            threshold: 1.0,
            sample_size: 50,
        };
        let (backbone, _) = pretrain(&partition.public, &config.train).unwrap();
        (partition.private, backbone, config)
    }

    #[test]
    fn single_prompt_unlearn_sees_all_survivors() {
        let (private, m, config) = fixture();
        let (_, metrics) = baseline_single_prompt(&private, &m, &config.tune, 5).unwrap();
        assert_eq!(metrics.worst_case_retrain_data, private.len() - 1);
        let removed: BTreeSet<u64> = [private.images[0].id].into_iter().collect();
        let (pair, survivors, report) =
            single_prompt_unlearn(&private, &m, &config.tune, 5, &removed).unwrap();
        assert_eq!(report.retrained_data_count, private.len() - 1);
        assert_eq!(report.retrained_param_count, pair.param_count());
        assert_eq!(survivors.len(), private.len() - 1);
    }

    #[test]
    fn random_groups_are_balanced_and_validated() {
        let (private, m, config) = fixture();
        let clusters = random_partition_clusters(&private, &m, 7, config.threshold, 3).unwrap();
        let sizes: Vec<usize> = clusters.clusters.iter().map(|c| c.member_ids.len()).collect();
        let min = sizes.iter().min().unwrap();
        let max = sizes.iter().max().unwrap();
        assert!(max - min <= 1, "sizes {sizes:?}");
        clusters.validate(&private).unwrap();
        assert!(random_partition_clusters(&private, &m, 0, 1.0, 3).is_err());
        assert!(random_partition_clusters(&private, &m, private.len() + 1, 1.0, 3).is_err());
    }

    #[test]
    fn random_partition_with_one_group_is_the_single_prompt() {
        let (private, m, config) = fixture();
        let (state, _) = baseline_random_partition(&private, &m, 1, &config, 8, 1).unwrap();
        let (pair, _) = baseline_single_prompt(&private, &m, &config.tune, 8).unwrap();
        assert_eq!(state.pairs, vec![pair]);
        assert_eq!(state.num_clusters(), 1);
        assert_eq!(state.clusters.clusters[0].prototype.len(), m.feature_dim());
    }

    #[test]
    fn random_partition_unlearns_through_the_standard_path() {
        let (private, m, config) = fixture();
        let (state, _) = baseline_random_partition(&private, &m, 4, &config, 9, 1).unwrap();
        let target = private.images[3].id;
        let k = state.clusters.cluster_of(target).unwrap();
        let ids: BTreeSet<u64> = [target].into_iter().collect();
        let (next, report) = unlearn(&state, &ids).unwrap();
        assert!(!report.reclustered);
        assert_eq!(report.affected_cluster_ids, [k].into_iter().collect());
        // Prototypes are routing metadata and stay fixed.
        assert_eq!(next.clusters.clusters[k].prototype, state.clusters.clusters[k].prototype);
    }

    #[test]
    fn emptying_a_group_collapses_loudly() {
        let (private, m, config) = fixture();
        let k = private.len(); // every group has exactly one member
        let (state, _) = baseline_random_partition(&private, &m, k, &config, 10, 1).unwrap();
        let victim = state.clusters.clusters[2].member_ids.clone();
        match unlearn(&state, &victim) {
            Err(Error::ClusterCollapse { cluster_id }) => assert_eq!(cluster_id, 2),
            other => panic!("expected ClusterCollapse, got {other:?}"),
        }
    }

    #[test]
    fn shared_head_reports_all_surviving_data() {
        let (private, m, config) = fixture();
        let clusters =
            random_partition_clusters(&private, &m, 4, config.threshold, 11).unwrap();
        let (shared, metrics) =
            baseline_shared_head(&private, &m, &clusters, &config.tune, 11).unwrap();
        assert_eq!(metrics.worst_case_retrain_data, private.len() - 1);
        let removed: BTreeSet<u64> = [private.images[5].id, private.images[9].id]
            .into_iter()
            .collect();
        let (next, survivors, report) =
            shared_head_unlearn(&shared, &private, &m, &config.tune, 11, &removed).unwrap();
        assert_eq!(report.retrained_data_count, survivors.len());
        assert_eq!(survivors.len(), private.len() - 2);
        assert_eq!(next.prompts.len(), shared.prompts.len());
        // Unaffected prompts stay bit-identical.
        let affected: BTreeSet<usize> = removed
            .iter()
            .map(|id| membership_index(&shared.clusters)[id])
            .collect();
        for (k, (old, new)) in shared.prompts.iter().zip(&next.prompts).enumerate() {
            if !affected.contains(&k) {
                assert_eq!(old, new);
            }
        }
    }

    #[test]
    fn shared_head_with_one_cluster_is_the_single_prompt() {
        let (private, m, config) = fixture();
        let clusters = random_partition_clusters(&private, &m, 1, config.threshold, 12).unwrap();
        let (shared, _) = baseline_shared_head(&private, &m, &clusters, &config.tune, 12).unwrap();
        let (pair, _) = baseline_single_prompt(&private, &m, &config.tune, 12).unwrap();
        assert_eq!(shared.prompts, vec![pair.prompt.clone()]);
        assert_eq!(shared.head, pair.head);
        let test = crate::data::generate_synthetic(4, 10, private.shape, 0.08, 600).unwrap();
        let a = shared_head_evaluate(&m, &shared, &test).unwrap();
        let b = single_prompt_evaluate(&m, &pair, &test).unwrap();
        assert_eq!(a.accuracy, b.accuracy);
    }

    #[test]
    fn shared_head_training_is_deterministic() {
        let (private, m, config) = fixture();
        let clusters = random_partition_clusters(&private, &m, 3, config.threshold, 13).unwrap();
        let (a, _) = baseline_shared_head(&private, &m, &clusters, &config.tune, 13).unwrap();
        let (b, _) = baseline_shared_head(&private, &m, &clusters, &config.tune, 13).unwrap();
        assert_eq!(a, b);
    }
}
