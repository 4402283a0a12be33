//! Exact unlearning by targeted re-optimization.
//!
//! Removing private points only touches the clusters that contained them:
//! the affected prompt/head pairs are re-initialized from their original
//! seeds and re-tuned on the surviving members, while the backbone, the
//! other clusters, and their pairs stay bit-identical. When a *sampled*
//! point is removed the clustering itself is re-run on the surviving
//! recorded sample (never a fresh one), so the result still matches a
//! from-scratch pipeline. [`oracle_retrain`] is that from-scratch witness.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use crate::backbone::BackboneModel;
use crate::cluster::{adaptive_cluster, cluster_with_pinned_sample, ClusterModel};
use crate::data::{Dataset, LabeledImage};
use crate::error::{Error, Result};
use crate::prompt::{
    init_pair, predict, tune_all, tune_pair, PixelFramePrompt, PromptHeadPair, TuneConfig,
};
use crate::rng::{derive_seed, domain, stream_id, RngStream};

pub use crate::backbone::TrainConfig;

/// Everything needed to reproduce training deterministically.
#[derive(Debug, Clone, PartialEq)]
pub struct EraserConfig {
    pub train: TrainConfig,
    pub tune: TuneConfig,
    pub threshold: f64,
    pub sample_size: usize,
}

impl EraserConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.tune.validate()?;
        if !(self.threshold > 0.0) {
            return Err(Error::Domain(format!(
                "threshold must be positive, got {}",
                self.threshold
            )));
        }
        if self.sample_size == 0 {
            return Err(Error::Domain("sample_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Complete mutable system state; the object unlearning rewrites.
#[derive(Debug, Clone, PartialEq)]
pub struct EraserState {
    pub backbone: BackboneModel,
    pub clusters: ClusterModel,
    pub pairs: Vec<PromptHeadPair>,
    pub private: Dataset,
    pub config: EraserConfig,
    pub global_seed: u64,
    pub version: u64,
}

impl EraserState {
    /// Clusters the private data and tunes one pair per cluster on a frozen
    /// backbone. The sole way a fresh state comes into being.
    pub fn train(
        backbone: BackboneModel,
        private: Dataset,
        config: EraserConfig,
        global_seed: u64,
        threads: usize,
    ) -> Result<EraserState> {
        config.validate()?;
        if private.is_empty() {
            return Err(Error::Domain("private dataset is empty".into()));
        }
        let sample_size = config.sample_size.min(private.len());
        let clusters =
            adaptive_cluster(&private, &backbone, sample_size, config.threshold, global_seed)
                .map_err(|e| e.tag("cluster"))?;
        let pairs = tune_all(&clusters, &private, &backbone, &config.tune, global_seed, threads)
            .map_err(|e| e.tag("tune"))?;
        Ok(EraserState { backbone, clusters, pairs, private, config, global_seed, version: 1 })
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters.num_clusters()
    }

    /// Tunable parameters of one prompt/head pair under this configuration.
    pub fn pair_param_count(&self) -> usize {
        PixelFramePrompt::frame_value_count(self.private.shape, self.config.tune.frame_width)
            + self.backbone.feature_dim() * self.private.num_classes
            + self.private.num_classes
    }

    /// Backbone plus every pair: what a full retrain would touch.
    pub fn total_param_count(&self) -> usize {
        self.backbone.param_count() + self.pairs.iter().map(|p| p.param_count()).sum::<usize>()
    }
}

/// What one unlearning request touched.
#[derive(Debug, Clone, PartialEq)]
pub struct UnlearnReport {
    pub removed_ids: BTreeSet<u64>,
    pub affected_cluster_ids: BTreeSet<usize>,
    pub reclustered: bool,
    pub retrained_param_count: usize,
    pub retrained_data_count: usize,
    pub untouched_param_count: usize,
    pub elapsed_seconds: f64,
}

impl UnlearnReport {
    pub fn header() -> &'static str {
        "version\tremoved_count\taffected_clusters\treclustered\tretrained_params\tretrained_data\telapsed_seconds"
    }

    pub fn line(&self, version: u64) -> String {
        format!(
            "{version}\t{}\t{}\t{}\t{}\t{}\t{:.6}",
            self.removed_ids.len(),
            self.affected_cluster_ids.len(),
            self.reclustered,
            self.retrained_param_count,
            self.retrained_data_count,
            self.elapsed_seconds
        )
    }
}

fn members_of<'a>(private: &'a Dataset, ids: &BTreeSet<u64>) -> Vec<&'a LabeledImage> {
    ids.iter().map(|id| private.get(*id).expect("member ids come from the dataset")).collect()
}

fn retune_pair(state_like: (&BackboneModel, &Dataset, &EraserConfig, u64), k: usize, data: &[&LabeledImage]) -> Result<PromptHeadPair> {
    let (backbone, private, config, global_seed) = state_like;
    let pair = init_pair(
        k,
        private.shape,
        backbone.feature_dim(),
        private.num_classes,
        config.tune.frame_width,
        global_seed,
    )?;
    tune_pair(data, backbone, &pair, &config.tune, derive_seed(global_seed, domain::TUNE_ORDER, k as u64))
}

/// Removes the given private ids and re-optimizes exactly what their removal
/// invalidates. Returns the successor state and a cost report; the input
/// state is untouched.
pub fn unlearn(state: &EraserState, ids: &BTreeSet<u64>) -> Result<(EraserState, UnlearnReport)> {
    let start = Instant::now();
    let private_ids = state.private.ids();
    if let Some(missing) = ids.iter().find(|id| !private_ids.contains(id)) {
        return Err(Error::NotFound(format!("id {missing} is not in the private dataset")));
    }

    if ids.is_empty() {
        let mut next = state.clone();
        next.version += 1;
        let untouched = next.total_param_count();
        return Ok((
            next,
            UnlearnReport {
                removed_ids: BTreeSet::new(),
                affected_cluster_ids: BTreeSet::new(),
                reclustered: false,
                retrained_param_count: 0,
                retrained_data_count: 0,
                untouched_param_count: untouched,
                elapsed_seconds: start.elapsed().as_secs_f64(),
            },
        ));
    }

    let sampled_hit = ids.iter().any(|id| state.clusters.sample_ids.contains(id));

    let (next, affected, reclustered, retrained_data) = if !sampled_hit {
        // Only assignment-phase members are leaving: cluster structure,
        // prototypes, and every other pair stay bit-identical.
        let mut affected: BTreeMap<usize, BTreeSet<u64>> = BTreeMap::new();
        for id in ids {
            let k = state
                .clusters
                .cluster_of(*id)
                .ok_or_else(|| Error::State(format!("id {id} is in no cluster")))?;
            affected.entry(k).or_default().insert(*id);
        }
        for (k, removed) in &affected {
            if state.clusters.clusters[*k].member_ids.len() == removed.len() {
                return Err(Error::ClusterCollapse { cluster_id: *k });
            }
        }
        let private = state.private.remove_points(ids)?;
        let mut clusters = state.clusters.clone();
        let mut pairs = state.pairs.clone();
        let mut retrained_data = 0usize;
        for (k, removed) in &affected {
            let cluster = &mut clusters.clusters[*k];
            for id in removed {
                cluster.member_ids.remove(id);
            }
            let data = members_of(&private, &cluster.member_ids);
            retrained_data += data.len();
            pairs[*k] = retune_pair(
                (&state.backbone, &private, &state.config, state.global_seed),
                *k,
                &data,
            )
            .map_err(|e| e.tag(&format!("cluster {k}")))?;
        }
        let next = EraserState {
            backbone: state.backbone.clone(),
            clusters,
            pairs,
            private,
            config: state.config.clone(),
            global_seed: state.global_seed,
            version: state.version + 1,
        };
        let affected_set: BTreeSet<usize> = affected.keys().cloned().collect();
        (next, affected_set, false, retrained_data)
    } else {
        // A sampled point is leaving: re-run clustering deterministically on
        // the surviving recorded sample and retrain whatever changed.
        let surviving_sample: BTreeSet<u64> =
            state.clusters.sample_ids.difference(ids).cloned().collect();
        if surviving_sample.is_empty() {
            return Err(Error::State(
                "removal leaves no sampled points; rebuild the model with a fresh sample".into(),
            ));
        }
        let private = state.private.remove_points(ids)?;
        let clusters = cluster_with_pinned_sample(
            &private,
            &state.backbone,
            &surviving_sample,
            state.clusters.threshold,
            state.clusters.seed,
        )
        .map_err(|e| e.tag("recluster"))?;
        let mut pairs = Vec::with_capacity(clusters.num_clusters());
        let mut affected_set = BTreeSet::new();
        let mut retrained_data = 0usize;
        for cluster in &clusters.clusters {
            let unchanged = state
                .clusters
                .clusters
                .get(cluster.cluster_id)
                .map(|old| {
                    old.member_ids == cluster.member_ids
                        && old.sampled_member_ids == cluster.sampled_member_ids
                })
                .unwrap_or(false);
            if unchanged {
                // Retuning would reproduce the stored pair bit for bit.
                pairs.push(state.pairs[cluster.cluster_id].clone());
            } else {
                let data = members_of(&private, &cluster.member_ids);
                retrained_data += data.len();
                affected_set.insert(cluster.cluster_id);
                pairs.push(
                    retune_pair(
                        (&state.backbone, &private, &state.config, state.global_seed),
                        cluster.cluster_id,
                        &data,
                    )
                    .map_err(|e| e.tag(&format!("cluster {}", cluster.cluster_id)))?,
                );
            }
        }
        let next = EraserState {
            backbone: state.backbone.clone(),
            clusters,
            pairs,
            private,
            config: state.config.clone(),
            global_seed: state.global_seed,
            version: state.version + 1,
        };
        (next, affected_set, true, retrained_data)
    };

    let retrained_params = affected.len() * next.pair_param_count();
    let report = UnlearnReport {
        removed_ids: ids.clone(),
        affected_cluster_ids: affected,
        reclustered,
        retrained_param_count: retrained_params,
        retrained_data_count: retrained_data,
        untouched_param_count: next.total_param_count() - retrained_params,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((next, report))
}

/// The exactness witness: the full pipeline re-run on the reduced private
/// data with the recorded sample pinned (the backbone is reused because the
/// public data never changes). [`unlearn`] must match this bit for bit.
pub fn oracle_retrain(
    backbone: &BackboneModel,
    private: &Dataset,
    pinned_sample: &BTreeSet<u64>,
    config: &EraserConfig,
    global_seed: u64,
    threads: usize,
) -> Result<EraserState> {
    config.validate()?;
    let clusters = cluster_with_pinned_sample(
        private,
        backbone,
        pinned_sample,
        config.threshold,
        global_seed,
    )?;
    let pairs = tune_all(&clusters, private, backbone, &config.tune, global_seed, threads)?;
    Ok(EraserState {
        backbone: backbone.clone(),
        clusters,
        pairs,
        private: private.clone(),
        config: config.clone(),
        global_seed,
        version: 1,
    })
}

/// Field-by-field equality ignoring the version counter.
pub fn states_content_equal(a: &EraserState, b: &EraserState) -> bool {
    a.backbone == b.backbone
        && a.clusters == b.clusters
        && a.pairs == b.pairs
        && a.private == b.private
        && a.config == b.config
        && a.global_seed == b.global_seed
}

/// Largest absolute difference across all parameters (backbone layers,
/// prototypes, prompt values, head weights and biases). Infinite when the
/// two states are not structurally comparable.
pub fn max_param_abs_diff(a: &EraserState, b: &EraserState) -> f64 {
    let mut max = 0.0f64;
    let mut track = |xs: &[f64], ys: &[f64]| -> bool {
        if xs.len() != ys.len() {
            return false;
        }
        for (x, y) in xs.iter().zip(ys) {
            max = max.max((x - y).abs());
        }
        true
    };
    if a.backbone.layers().len() != b.backbone.layers().len()
        || a.clusters.num_clusters() != b.clusters.num_clusters()
        || a.pairs.len() != b.pairs.len()
    {
        return f64::INFINITY;
    }
    for (la, lb) in a.backbone.layers().iter().zip(b.backbone.layers()) {
        if !track(la.weight.data(), lb.weight.data()) || !track(&la.bias, &lb.bias) {
            return f64::INFINITY;
        }
    }
    for (ca, cb) in a.clusters.clusters.iter().zip(&b.clusters.clusters) {
        if !track(&ca.prototype, &cb.prototype) {
            return f64::INFINITY;
        }
    }
    for (pa, pb) in a.pairs.iter().zip(&b.pairs) {
        if !track(&pa.prompt.values, &pb.prompt.values)
            || !track(pa.head.weight.data(), pb.head.weight.data())
            || !track(&pa.head.bias, &pb.head.bias)
        {
            return f64::INFINITY;
        }
    }
    max
}

/// Classification quality on a test set.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub per_class: Vec<f64>,
    pub correct: usize,
    pub total: usize,
}

/// Evaluates any classifier callback over a dataset.
pub fn evaluate_with<F>(test: &Dataset, mut classify: F) -> Result<Evaluation>
where
    F: FnMut(&LabeledImage) -> Result<usize>,
{
    if test.is_empty() {
        return Err(Error::Domain("test dataset is empty".into()));
    }
    let mut correct = 0usize;
    let mut per_class_correct = vec![0usize; test.num_classes];
    let mut per_class_total = vec![0usize; test.num_classes];
    for img in &test.images {
        per_class_total[img.label] += 1;
        if classify(img)? == img.label {
            correct += 1;
            per_class_correct[img.label] += 1;
        }
    }
    let per_class = per_class_correct
        .iter()
        .zip(&per_class_total)
        .map(|(&c, &t)| if t > 0 { c as f64 / t as f64 } else { 0.0 })
        .collect();
    Ok(Evaluation {
        accuracy: correct as f64 / test.len() as f64,
        per_class,
        correct,
        total: test.len(),
    })
}

/// Routed prediction accuracy of a trained state on a test set.
pub fn evaluate_state(state: &EraserState, test: &Dataset) -> Result<Evaluation> {
    if test.shape != state.private.shape {
        return Err(Error::Domain(format!(
            "test shape {:?} does not match model input {:?}",
            test.shape, state.private.shape
        )));
    }
    if test.num_classes != state.private.num_classes {
        return Err(Error::Domain(format!(
            "test has {} classes, model has {}",
            test.num_classes, state.private.num_classes
        )));
    }
    evaluate_with(test, |img| {
        predict(&img.pixels, &state.backbone, &state.clusters, &state.pairs).map(|p| p.label)
    })
}

/// One row of the unlearning-ratio sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioSweepRow {
    pub ratio: f64,
    pub accuracy: f64,
    pub retrained_params: usize,
    pub elapsed_seconds: f64,
}

/// For each ratio, removes that fraction of the private data (a seeded
/// uniform subset) from a fresh copy of the state and evaluates the result.
pub fn unlearn_ratio_sweep(
    state: &EraserState,
    ratios: &[f64],
    eval_set: &Dataset,
    seed: u64,
) -> Result<Vec<RatioSweepRow>> {
    for &r in ratios {
        if !(0.0..1.0).contains(&r) {
            return Err(Error::Domain(format!("unlearning ratio must be in [0, 1), got {r}")));
        }
    }
    let all_ids: Vec<u64> = state.private.images.iter().map(|i| i.id).collect();
    let mut rows = Vec::with_capacity(ratios.len());
    for (i, &ratio) in ratios.iter().enumerate() {
        let count = (ratio * all_ids.len() as f64).round() as usize;
        let mut shuffled = all_ids.clone();
        let mut rng = RngStream::new(seed, stream_id(domain::RATIO_SWEEP, i as u64));
        rng.shuffle(&mut shuffled);
        let ids: BTreeSet<u64> = shuffled.into_iter().take(count).collect();
        let (next, report) = unlearn(state, &ids)?;
        let eval = evaluate_state(&next, eval_set)?;
        rows.push(RatioSweepRow {
            ratio,
            accuracy: eval.accuracy,
            retrained_params: report.retrained_param_count,
            elapsed_seconds: report.elapsed_seconds,
        });
    }
    Ok(rows)
}

/// Parameter-count ratio between a full retrain and a targeted one.
pub fn cost_ratio(full_params: u64, targeted_params: u64) -> Result<f64> {
    if targeted_params == 0 {
        return Err(Error::Domain("targeted parameter count must be positive".into()));
    }
    Ok(full_params as f64 / targeted_params as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbone::pretrain;
    use crate::data::generate_synthetic;
    use crate::num::Matrix;
    use crate::prompt::ClassifierHead;

    fn fixture(seed: u64, sample_size: usize) -> EraserState {
        let source = generate_synthetic(4, 60, (4, 4, 1), 0.08, seed).unwrap();
        let partition = source.partition(0.5, seed).unwrap();
        let config = EraserConfig {
            train: TrainConfig {
                learning_rate: 0.1,
                epochs: 6,
                batch_size: 16,
                seed: derive_seed(seed, domain::PRETRAIN_SEED, 0),
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
            sample_size,
        };
        let (backbone, _) = pretrain(&partition.public, &config.train).unwrap();
        EraserState::train(backbone, partition.private, config, seed, 1).unwrap()
    }

    #[test]
    fn empty_request_only_bumps_version() {
        let state = fixture(1, 80);
        let (next, report) = unlearn(&state, &BTreeSet::new()).unwrap();
        assert_eq!(next.version, state.version + 1);
        assert!(states_content_equal(&state, &next));
        assert_eq!(report.retrained_param_count, 0);
        assert_eq!(report.retrained_data_count, 0);
        assert!(report.affected_cluster_ids.is_empty());
        assert!(!report.reclustered);
    }

    #[test]
    fn unknown_id_is_rejected() {
        let state = fixture(2, 80);
        let ids: BTreeSet<u64> = [999_999].into_iter().collect();
        match unlearn(&state, &ids) {
            Err(Error::NotFound(msg)) => assert!(msg.contains("999999")),
            other => panic!("expected NotFound, got {other:?}"),
        }
    }

    #[test]
    fn unsampled_removal_matches_oracle_and_stays_local() {
        let state = fixture(3, 70);
        let unsampled: Vec<u64> = state
            .private
            .images
            .iter()
            .map(|i| i.id)
            .filter(|id| !state.clusters.sample_ids.contains(id))
            .collect();
        assert!(!unsampled.is_empty());
        let target = unsampled[unsampled.len() / 2];
        let k = state.clusters.cluster_of(target).unwrap();
        let ids: BTreeSet<u64> = [target].into_iter().collect();

        let (next, report) = unlearn(&state, &ids).unwrap();
        assert!(!report.reclustered);
        assert_eq!(report.affected_cluster_ids, [k].into_iter().collect());
        assert_eq!(report.retrained_param_count, state.pair_param_count());

        // Locality: untouched pairs and the backbone are bit-identical.
        assert_eq!(next.backbone.param_digest(), state.backbone.param_digest());
        for (i, (old, new)) in state.pairs.iter().zip(&next.pairs).enumerate() {
            if i != k {
                assert_eq!(old, new, "pair {i} moved");
            } else {
                assert_ne!(old, new, "affected pair did not move");
            }
        }

        // Exactness: equal to the pipeline retrained from scratch.
        let reduced = state.private.remove_points(&ids).unwrap();
        let oracle = oracle_retrain(
            &state.backbone,
            &reduced,
            &state.clusters.sample_ids,
            &state.config,
            state.global_seed,
            1,
        )
        .unwrap();
        assert!(states_content_equal(&next, &oracle));
        assert_eq!(max_param_abs_diff(&next, &oracle), 0.0);
    }

    #[test]
    fn sampled_removal_reclusters_against_pinned_oracle() {
        let state = fixture(4, 70);
        let target = *state.clusters.sample_ids.iter().next().unwrap();
        let ids: BTreeSet<u64> = [target].into_iter().collect();
        let (next, report) = unlearn(&state, &ids).unwrap();
        assert!(report.reclustered);
        assert_eq!(next.clusters.sample_size, state.clusters.sample_size - 1);
        assert!(!next.clusters.sample_ids.contains(&target));

        let reduced = state.private.remove_points(&ids).unwrap();
        let surviving: BTreeSet<u64> =
            state.clusters.sample_ids.difference(&ids).cloned().collect();
        let oracle = oracle_retrain(
            &state.backbone,
            &reduced,
            &surviving,
            &state.config,
            state.global_seed,
            1,
        )
        .unwrap();
        assert!(states_content_equal(&next, &oracle));
        assert_eq!(max_param_abs_diff(&next, &oracle), 0.0);
    }

    #[test]
    fn multi_cluster_removal_reports_both_clusters() {
        let state = fixture(5, 70);
        let mut picks: Vec<u64> = Vec::new();
        let mut seen = BTreeSet::new();
        for img in &state.private.images {
            if state.clusters.sample_ids.contains(&img.id) {
                continue;
            }
            let k = state.clusters.cluster_of(img.id).unwrap();
            if seen.insert(k) {
                picks.push(img.id);
            }
            if picks.len() == 2 {
                break;
            }
        }
        assert_eq!(picks.len(), 2, "fixture needs two clusters with unsampled points");
        let ids: BTreeSet<u64> = picks.into_iter().collect();
        let (next, report) = unlearn(&state, &ids).unwrap();
        assert_eq!(report.affected_cluster_ids.len(), 2);
        assert_eq!(report.retrained_param_count, 2 * state.pair_param_count());

        let reduced = state.private.remove_points(&ids).unwrap();
        let oracle = oracle_retrain(
            &state.backbone,
            &reduced,
            &state.clusters.sample_ids,
            &state.config,
            state.global_seed,
            1,
        )
        .unwrap();
        assert!(states_content_equal(&next, &oracle));
    }

    #[test]
    fn oracle_on_untouched_data_reproduces_training() {
        let state = fixture(6, 70);
        let oracle = oracle_retrain(
            &state.backbone,
            &state.private,
            &state.clusters.sample_ids,
            &state.config,
            state.global_seed,
            1,
        )
        .unwrap();
        assert_eq!(state, oracle);
    }

    #[test]
    fn report_census_matches_hand_count() {
        let state = fixture(7, 60);
        // Independent parameter census: walk the actual tensors.
        let mut pair_params = 0usize;
        let pair = &state.pairs[0];
        let (h, w, c) = pair.prompt.shape;
        for row in 0..h {
            for col in 0..w {
                if !PixelFramePrompt::is_interior(pair.prompt.shape, pair.prompt.frame_width, row, col)
                {
                    pair_params += c;
                }
            }
        }
        pair_params += pair.head.weight.rows() * pair.head.weight.cols() + pair.head.bias.len();
        assert_eq!(state.pair_param_count(), pair_params);
        assert_eq!(pair.param_count(), pair_params);

        let mut total = pair_params * state.pairs.len();
        for layer in state.backbone.layers() {
            total += layer.weight.rows() * layer.weight.cols() + layer.bias.len();
        }
        assert_eq!(state.total_param_count(), total);
    }

    #[test]
    fn cost_ratio_values() {
        assert_eq!(cost_ratio(85_000_000, 200_000).unwrap(), 425.0);
        assert_eq!(cost_ratio(123, 123).unwrap(), 1.0);
        assert!(matches!(cost_ratio(5, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn zero_weight_head_guesses_first_class() {
        // A routed system whose single head has zero weights always answers
        // class 0, so accuracy on balanced data is exactly 1/L.
        let mut state = fixture(8, 60);
        let classes = state.private.num_classes;
        for pair in &mut state.pairs {
            pair.head = ClassifierHead {
                weight: Matrix::zeros(state.backbone.feature_dim(), classes),
                bias: vec![0.0; classes],
                cluster_id: pair.head.cluster_id,
            };
        }
        let test = generate_synthetic(classes, 25, state.private.shape, 0.08, 500).unwrap();
        let eval = evaluate_state(&state, &test).unwrap();
        assert_eq!(eval.accuracy, 1.0 / classes as f64);
        assert_eq!(eval.per_class[0], 1.0);
        assert!(eval.per_class[1..].iter().all(|a| *a == 0.0));
    }

    #[test]
    fn evaluation_is_order_invariant() {
        let state = fixture(9, 60);
        let test = generate_synthetic(4, 10, state.private.shape, 0.08, 321).unwrap();
        let forward = evaluate_state(&state, &test).unwrap();
        // Same images, reversed order, fresh ids.
        let mut reversed_images: Vec<_> = test.images.iter().rev().cloned().collect();
        for (i, img) in reversed_images.iter_mut().enumerate() {
            img.id = i as u64;
        }
        let reversed = Dataset::new("rev", test.num_classes, test.shape, reversed_images).unwrap();
        let backward = evaluate_state(&state, &reversed).unwrap();
        assert_eq!(forward.accuracy, backward.accuracy);
    }

    #[test]
    fn evaluation_rejects_mismatched_test_sets() {
        let state = fixture(10, 60);
        let wrong_shape = generate_synthetic(4, 5, (3, 3, 1), 0.05, 1).unwrap();
        assert!(matches!(evaluate_state(&state, &wrong_shape), Err(Error::Domain(_))));
        let wrong_classes = generate_synthetic(6, 5, state.private.shape, 0.05, 1).unwrap();
        assert!(matches!(evaluate_state(&state, &wrong_classes), Err(Error::Domain(_))));
    }

    #[test]
    fn ratio_sweep_zero_point_is_exact_baseline() {
        let state = fixture(11, 60);
        let test = generate_synthetic(4, 15, state.private.shape, 0.08, 77).unwrap();
        let baseline = evaluate_state(&state, &test).unwrap();
        let rows = unlearn_ratio_sweep(&state, &[0.0, 0.25], &test, 13).unwrap();
        assert_eq!(rows[0].ratio, 0.0);
        assert_eq!(rows[0].accuracy, baseline.accuracy);
        assert_eq!(rows[0].retrained_params, 0);
        assert!(rows[1].retrained_params > 0);
        assert!(matches!(
            unlearn_ratio_sweep(&state, &[1.0], &test, 13),
            Err(Error::Domain(_))
        ));
    }
}
