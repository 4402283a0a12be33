//! Experiment orchestration behind the CLI subcommands.
//!
//! Every command is a plain function so the whole surface is testable
//! without spawning processes; the binary only parses arguments and maps
//! errors to exit codes.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::backbone::{pretrain, BackboneModel};
use crate::baseline::{
    baseline_shared_head_traced, baseline_single_prompt_traced, random_partition_clusters,
    shared_head_evaluate, shared_head_predict, shared_head_unlearn, single_prompt_evaluate,
    single_prompt_predict, single_prompt_unlearn, SharedHeadModel,
};
use crate::checkpoint;
use crate::cluster::{adaptive_cluster, threshold_sweep, ClusterModel};
use crate::config::{Config, DatasetSpec};
use crate::data::{generate_synthetic, load_idx, Dataset, LabeledImage};
use crate::error::{Error, Result};
use crate::prompt::{predict, tune_all_snapshots, PromptHeadPair};
use crate::rng::{domain, stream_id, RngStream};
use crate::unlearn::{
    evaluate_state, evaluate_with, unlearn, unlearn_ratio_sweep, EraserState, UnlearnReport,
};

/// Worker cap for per-cluster tuning: `ERASER_THREADS` when set, otherwise
/// the hardware parallelism.
pub fn worker_threads() -> Result<usize> {
    match std::env::var("ERASER_THREADS") {
        Ok(raw) => raw.trim().parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| {
            Error::Config {
                field: "ERASER_THREADS".into(),
                message: format!("`{raw}` is not a positive integer"),
            }
        }),
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

/// The materialized experiment data.
pub struct ExperimentData {
    pub public: Dataset,
    pub private: Dataset,
    pub test: Option<Dataset>,
}

impl ExperimentData {
    /// Test set when configured, otherwise the private training data.
    pub fn eval_set(&self) -> &Dataset {
        self.test.as_ref().unwrap_or(&self.private)
    }
}

fn split_synthetic_per_class(
    full: Dataset,
    classes: usize,
    per_class: usize,
    test_per_class: usize,
) -> Result<(Dataset, Option<Dataset>)> {
    if test_per_class == 0 {
        return Ok((full, None));
    }
    let group = per_class + test_per_class;
    let mut train_images = Vec::with_capacity(classes * per_class);
    let mut test_images = Vec::with_capacity(classes * test_per_class);
    for (i, img) in full.images.iter().enumerate() {
        if i % group < per_class {
            train_images.push(img.clone());
        } else {
            test_images.push(img.clone());
        }
    }
    let train = Dataset::new(full.name.clone(), full.num_classes, full.shape, train_images)?;
    let test = Dataset::new(format!("{}.test", full.name), full.num_classes, full.shape, test_images)?;
    Ok((train, Some(test)))
}

fn offset_ids(d: Dataset, offset: u64) -> Result<Dataset> {
    let images = d
        .images
        .into_iter()
        .map(|img| LabeledImage { id: img.id + offset, ..img })
        .collect();
    Dataset::new(d.name, d.num_classes, d.shape, images)
}

fn with_classes(d: Dataset, num_classes: usize) -> Result<Dataset> {
    Dataset::new(d.name, num_classes, d.shape, d.images)
}

/// Loads or generates the public/private/test datasets for a configuration.
pub fn build_datasets(config: &Config) -> Result<ExperimentData> {
    match &config.dataset {
        DatasetSpec::Synthetic { classes, per_class, test_per_class, shape, noise_sigma } => {
            let full = generate_synthetic(
                *classes,
                per_class + test_per_class,
                *shape,
                *noise_sigma,
                config.global_seed,
            )?;
            let (source, test) =
                split_synthetic_per_class(full, *classes, *per_class, *test_per_class)?;
            let partition = source.partition(config.public_fraction, config.global_seed)?;
            Ok(ExperimentData { public: partition.public, private: partition.private, test })
        }
        DatasetSpec::Idx { images, labels, test_images, test_labels } => {
            let source = load_idx(images, labels)?;
            let partition = source.partition(config.public_fraction, config.global_seed)?;
            let test = load_test_pair(test_images, test_labels)?;
            Ok(ExperimentData { public: partition.public, private: partition.private, test })
        }
        DatasetSpec::IdxSplit {
            public_images,
            public_labels,
            private_images,
            private_labels,
            test_images,
            test_labels,
        } => {
            let public = load_idx(public_images, public_labels)?;
            let private = load_idx(private_images, private_labels)?;
            if public.shape != private.shape {
                return Err(Error::Domain(format!(
                    "public shape {:?} differs from private shape {:?}",
                    public.shape, private.shape
                )));
            }
            let test = load_test_pair(test_images, test_labels)?;
            let mut num_classes = public.num_classes.max(private.num_classes);
            if let Some(t) = &test {
                num_classes = num_classes.max(t.num_classes);
            }
            let offset = public.images.last().map(|i| i.id + 1).unwrap_or(0);
            let public = with_classes(public, num_classes)?;
            let private = with_classes(offset_ids(private, offset)?, num_classes)?;
            let test = test.map(|t| with_classes(t, num_classes)).transpose()?;
            Ok(ExperimentData { public, private, test })
        }
    }
}

fn load_test_pair(
    images: &Option<PathBuf>,
    labels: &Option<PathBuf>,
) -> Result<Option<Dataset>> {
    match (images, labels) {
        (Some(i), Some(l)) => Ok(Some(load_idx(i, l)?)),
        (None, None) => Ok(None),
        _ => Err(Error::Config {
            field: "dataset.test_images".into(),
            message: "test images and labels must be given together".into(),
        }),
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn checkpoint_file_name(version: u64) -> String {
    format!("state.v{version}.lmer")
}

/// Next versioned path alongside an existing checkpoint file.
fn versioned_sibling(input: &Path, out_dir: Option<&Path>, version: u64) -> PathBuf {
    let dir = out_dir
        .map(Path::to_path_buf)
        .or_else(|| input.parent().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."));
    let stem = input
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("state.lmer")
        .trim_end_matches(".lmer");
    let base = match stem.rfind(".v") {
        Some(pos) if stem[pos + 2..].chars().all(|c| c.is_ascii_digit()) => &stem[..pos],
        _ => stem,
    };
    dir.join(format!("{base}.v{version}.lmer"))
}

// ---------------------------------------------------------------------------
// pipeline
// ---------------------------------------------------------------------------

pub struct PipelineOutcome {
    pub checkpoint_path: PathBuf,
    pub state: EraserState,
    pub num_clusters: usize,
    pub accuracy: f64,
    pub total_params: usize,
    pub per_pair_params: usize,
    pub summary_tsv: String,
    pub tune_log_path: PathBuf,
}

/// Runs partition, pretraining, clustering, tuning, and evaluation; writes a
/// checkpoint plus the per-epoch tuning losses.
pub fn cmd_pipeline(config: &Config, out_dir: &Path) -> Result<PipelineOutcome> {
    let threads = worker_threads()?;
    let data = build_datasets(config)?;
    let (backbone, _) = pretrain(&data.public, &config.train).map_err(|e| e.tag("backbone"))?;
    let state = EraserState::train(
        backbone,
        data.private.clone(),
        config.eraser_config(),
        config.global_seed,
        threads,
    )?;
    let eval = evaluate_state(&state, data.eval_set()).map_err(|e| e.tag("evaluate"))?;

    std::fs::create_dir_all(out_dir)?;
    let checkpoint_path = out_dir.join(checkpoint_file_name(state.version));
    checkpoint::save(&state, &checkpoint_path)?;

    let mut tune_log = String::from("cluster_id\tepoch\tmean_loss\n");
    for pair in &state.pairs {
        for &(epoch, loss) in &pair.tune_log {
            tune_log.push_str(&format!("{}\t{epoch}\t{loss:.12}\n", pair.prompt.cluster_id));
        }
    }
    let tune_log_path = out_dir.join("tune_log.tsv");
    std::fs::write(&tune_log_path, tune_log)?;

    let summary_tsv = format!(
        "K\taccuracy\ttotal_params\tper_pair_params\n{}\t{:.6}\t{}\t{}\n",
        state.num_clusters(),
        eval.accuracy,
        state.total_param_count(),
        state.pair_param_count(),
    );
    Ok(PipelineOutcome {
        checkpoint_path,
        num_clusters: state.num_clusters(),
        accuracy: eval.accuracy,
        total_params: state.total_param_count(),
        per_pair_params: state.pair_param_count(),
        summary_tsv,
        tune_log_path,
        state,
    })
}

// ---------------------------------------------------------------------------
// unlearn
// ---------------------------------------------------------------------------

/// How the points to remove are chosen.
pub enum RemovalRequest {
    Ids(BTreeSet<u64>),
    Ratio { ratio: f64, seed: u64 },
}

pub struct UnlearnOutcome {
    pub new_checkpoint: PathBuf,
    pub report: UnlearnReport,
    pub version: u64,
    pub report_tsv: String,
}

/// Applies an unlearning request to a checkpoint and writes the successor
/// checkpoint next to it; the input file is never touched.
pub fn cmd_unlearn(
    checkpoint_path: &Path,
    request: RemovalRequest,
    out_dir: Option<&Path>,
) -> Result<UnlearnOutcome> {
    let state = checkpoint::load(checkpoint_path)?;
    let ids = match request {
        RemovalRequest::Ids(ids) => ids,
        RemovalRequest::Ratio { ratio, seed } => {
            if !(0.0..1.0).contains(&ratio) {
                return Err(Error::Domain(format!("ratio must be in [0, 1), got {ratio}")));
            }
            let mut ids: Vec<u64> = state.private.images.iter().map(|i| i.id).collect();
            let count = (ratio * ids.len() as f64).round() as usize;
            let mut rng = RngStream::new(seed, stream_id(domain::UNLEARN_PICK, 0));
            rng.shuffle(&mut ids);
            ids.into_iter().take(count).collect()
        }
    };
    let (next, report) = unlearn(&state, &ids)?;
    let new_checkpoint = versioned_sibling(checkpoint_path, out_dir, next.version);
    if let Some(parent) = new_checkpoint.parent() {
        std::fs::create_dir_all(parent)?;
    }
    checkpoint::save(&next, &new_checkpoint)?;
    let report_tsv = format!("{}\n{}\n", UnlearnReport::header(), report.line(next.version));
    Ok(UnlearnOutcome { new_checkpoint, version: next.version, report_tsv, report })
}

// ---------------------------------------------------------------------------
// evaluate / inspect
// ---------------------------------------------------------------------------

pub struct EvalOutcome {
    pub accuracy: f64,
    pub per_class: Vec<f64>,
    pub tsv: String,
}

pub fn cmd_evaluate(checkpoint_path: &Path, config: &Config) -> Result<EvalOutcome> {
    let state = checkpoint::load(checkpoint_path)?;
    let data = build_datasets(config)?;
    let eval = evaluate_state(&state, data.eval_set())?;
    let mut tsv = String::from("class\taccuracy\n");
    tsv.push_str(&format!("all\t{:.6}\n", eval.accuracy));
    for (k, acc) in eval.per_class.iter().enumerate() {
        tsv.push_str(&format!("{k}\t{acc:.6}\n"));
    }
    Ok(EvalOutcome { accuracy: eval.accuracy, per_class: eval.per_class, tsv })
}

pub fn cmd_inspect(checkpoint_path: &Path) -> Result<String> {
    let manifest = checkpoint::manifest(checkpoint_path)?;
    let mut out = String::from("field\tvalue\n");
    out.push_str("magic\tLMER\n");
    out.push_str(&format!("format_version\t{}\n", manifest.format_version));
    out.push_str(&format!("state_version\t{}\n", manifest.state_version));
    out.push('\n');
    out.push_str("section\toffset\tlength\tsha256\n");
    for s in &manifest.sections {
        out.push_str(&format!("{}\t{}\t{}\t{}\n", s.name, s.offset, s.length, hex(&s.digest)));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// sweeps
// ---------------------------------------------------------------------------

/// Cluster counts over a threshold grid, as a `(t, K)` table.
pub fn cmd_sweep_threshold(config: &Config, thresholds: &[f64]) -> Result<String> {
    if thresholds.is_empty() {
        return Err(Error::Domain("no thresholds given".into()));
    }
    for &t in thresholds {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("threshold must be positive, got {t}")));
        }
    }
    let data = build_datasets(config)?;
    let (backbone, _) = pretrain(&data.public, &config.train).map_err(|e| e.tag("backbone"))?;
    let mut ts = thresholds.to_vec();
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let sample_size = config.sample_size.min(data.private.len());
    let rows = threshold_sweep(&data.private, &backbone, sample_size, config.global_seed, &ts)?;
    let mut out = String::from("t\tK\n");
    for (t, k) in rows {
        out.push_str(&format!("{t}\t{k}\n"));
    }
    Ok(out)
}

/// Accuracy after removing increasing fractions of the private data.
pub fn cmd_sweep_ratio(
    checkpoint_path: &Path,
    config: &Config,
    ratios: &[f64],
    seed: u64,
) -> Result<String> {
    if ratios.is_empty() {
        return Err(Error::Domain("no ratios given".into()));
    }
    let state = checkpoint::load(checkpoint_path)?;
    let data = build_datasets(config)?;
    let rows = unlearn_ratio_sweep(&state, ratios, data.eval_set(), seed)?;
    let mut out = String::from("ratio\taccuracy\tretrained_params\telapsed_seconds\n");
    for row in rows {
        out.push_str(&format!(
            "{}\t{:.6}\t{}\t{:.6}\n",
            row.ratio, row.accuracy, row.retrained_params, row.elapsed_seconds
        ));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub method: String,
    pub accuracy: f64,
    pub retrained_params: usize,
    pub retrained_data: usize,
    pub unlearn_seconds: f64,
}

pub struct CompareOutcome {
    pub rows: Vec<CompareRow>,
    pub table_tsv: String,
    pub accuracy_curves_path: PathBuf,
    pub cost_reference_path: PathBuf,
}

pub const COMPARE_HEADER: &str = "method\taccuracy\tretrained_params\tretrained_data\tunlearn_seconds";

fn eval_pairs_accuracy(
    model: &BackboneModel,
    clusters: &ClusterModel,
    pairs: &[PromptHeadPair],
    test: &Dataset,
) -> Result<f64> {
    Ok(evaluate_with(test, |img| {
        predict(&img.pixels, model, clusters, pairs).map(|p| p.label)
    })?
    .accuracy)
}

/// Picks the standardized removal target: the smallest unsampled private id
/// whose cluster keeps at least one member in every compared system.
fn pick_removal_id(adaptive: &EraserState, random: &EraserState) -> Result<u64> {
    for img in &adaptive.private.images {
        if adaptive.clusters.sample_ids.contains(&img.id) {
            continue;
        }
        let ka = adaptive.clusters.cluster_of(img.id);
        let kr = random.clusters.cluster_of(img.id);
        let fits = |cm: &ClusterModel, k: Option<usize>| {
            k.map(|k| cm.clusters[k].member_ids.len() >= 2).unwrap_or(false)
        };
        if fits(&adaptive.clusters, ka) && fits(&random.clusters, kr) {
            return Ok(img.id);
        }
    }
    Err(Error::State("no removable private point found for the comparison".into()))
}

/// Trains the adaptive system and the three baselines on one shared frozen
/// backbone, evaluates each, and times one standardized single-point
/// unlearning per method. Rows stream to `sink` as they are produced.
pub fn cmd_compare(config: &Config, out_dir: &Path, sink: &mut dyn Write) -> Result<CompareOutcome> {
    let data = build_datasets(config)?;
    let eval_set = data.eval_set().clone();
    let (backbone, _) = pretrain(&data.public, &config.train).map_err(|e| e.tag("backbone"))?;
    let eraser_config = config.eraser_config();
    std::fs::create_dir_all(out_dir)?;

    let mut curves = String::from("method\tepoch\ttest_accuracy\n");
    let mut rows: Vec<CompareRow> = Vec::new();
    let mut table_tsv = format!("{COMPARE_HEADER}\n");
    writeln!(sink, "{COMPARE_HEADER}")?;
    let push_row = |row: CompareRow,
                        table: &mut String,
                        sink: &mut dyn Write,
                        rows: &mut Vec<CompareRow>|
     -> Result<()> {
        let line = format!(
            "{}\t{:.6}\t{}\t{}\t{:.6}",
            row.method, row.accuracy, row.retrained_params, row.retrained_data, row.unlearn_seconds
        );
        table.push_str(&line);
        table.push('\n');
        writeln!(sink, "{line}")?;
        sink.flush()?;
        rows.push(row);
        Ok(())
    };

    // Adaptive clustering (the system under study).
    let sample_size = config.sample_size.min(data.private.len());
    let clusters = adaptive_cluster(
        &data.private,
        &backbone,
        sample_size,
        config.threshold,
        config.global_seed,
    )?;
    let (pairs, snapshots) = tune_all_snapshots(
        &clusters,
        &data.private,
        &backbone,
        &config.tune,
        config.global_seed,
    )?;
    for (epoch, epoch_pairs) in snapshots.iter().enumerate() {
        let acc = eval_pairs_accuracy(&backbone, &clusters, epoch_pairs, &eval_set)?;
        curves.push_str(&format!("adaptive\t{epoch}\t{acc:.6}\n"));
    }
    let adaptive = EraserState {
        backbone: backbone.clone(),
        clusters,
        pairs,
        private: data.private.clone(),
        config: eraser_config.clone(),
        global_seed: config.global_seed,
        version: 1,
    };
    let adaptive_accuracy = evaluate_state(&adaptive, &eval_set)?.accuracy;

    // Random partition at the matched cluster count.
    let k = adaptive.num_clusters();
    let random_clusters = random_partition_clusters(
        &data.private,
        &backbone,
        k,
        config.threshold,
        config.global_seed,
    )?;
    let (random_pairs, random_snapshots) = tune_all_snapshots(
        &random_clusters,
        &data.private,
        &backbone,
        &config.tune,
        config.global_seed,
    )?;
    for (epoch, epoch_pairs) in random_snapshots.iter().enumerate() {
        let acc = eval_pairs_accuracy(&backbone, &random_clusters, epoch_pairs, &eval_set)?;
        curves.push_str(&format!("random_partition\t{epoch}\t{acc:.6}\n"));
    }
    let random = EraserState {
        backbone: backbone.clone(),
        clusters: random_clusters,
        pairs: random_pairs,
        private: data.private.clone(),
        config: eraser_config.clone(),
        global_seed: config.global_seed,
        version: 1,
    };

    let removal_id = pick_removal_id(&adaptive, &random)?;
    let removal: BTreeSet<u64> = [removal_id].into_iter().collect();

    let (_, adaptive_report) = unlearn(&adaptive, &removal)?;
    push_row(
        CompareRow {
            method: "adaptive".into(),
            accuracy: adaptive_accuracy,
            retrained_params: adaptive_report.retrained_param_count,
            retrained_data: adaptive_report.retrained_data_count,
            unlearn_seconds: adaptive_report.elapsed_seconds,
        },
        &mut table_tsv,
        sink,
        &mut rows,
    )?;

    // Single prompt over everything.
    let mut single_curve: Vec<(usize, PromptHeadPair)> = Vec::new();
    let single_pair = baseline_single_prompt_traced(
        &data.private,
        &backbone,
        &config.tune,
        config.global_seed,
        |epoch, pair| single_curve.push((epoch, pair.clone())),
    )?;
    for (epoch, pair) in &single_curve {
        let acc = evaluate_with(&eval_set, |img| {
            single_prompt_predict(&img.pixels, &backbone, pair)
        })?
        .accuracy;
        curves.push_str(&format!("single_prompt\t{epoch}\t{acc:.6}\n"));
    }
    let single_accuracy = single_prompt_evaluate(&backbone, &single_pair, &eval_set)?.accuracy;
    let (_, _, single_report) =
        single_prompt_unlearn(&data.private, &backbone, &config.tune, config.global_seed, &removal)?;
    push_row(
        CompareRow {
            method: "single_prompt".into(),
            accuracy: single_accuracy,
            retrained_params: single_report.retrained_param_count,
            retrained_data: single_report.retrained_data_count,
            unlearn_seconds: single_report.elapsed_seconds,
        },
        &mut table_tsv,
        sink,
        &mut rows,
    )?;

    let random_accuracy = evaluate_state(&random, &eval_set)?.accuracy;
    let (_, random_report) = unlearn(&random, &removal)?;
    push_row(
        CompareRow {
            method: "random_partition".into(),
            accuracy: random_accuracy,
            retrained_params: random_report.retrained_param_count,
            retrained_data: random_report.retrained_data_count,
            unlearn_seconds: random_report.elapsed_seconds,
        },
        &mut table_tsv,
        sink,
        &mut rows,
    )?;

    // Shared head over the adaptive clustering.
    let mut shared_epochs: Vec<(usize, SharedHeadModel)> = Vec::new();
    let shared = baseline_shared_head_traced(
        &data.private,
        &backbone,
        &adaptive.clusters,
        &config.tune,
        config.global_seed,
        |epoch, model| shared_epochs.push((epoch, model.clone())),
    )?;
    for (epoch, model) in &shared_epochs {
        let acc = evaluate_with(&eval_set, |img| {
            shared_head_predict(&img.pixels, &backbone, model)
        })?
        .accuracy;
        curves.push_str(&format!("shared_head\t{epoch}\t{acc:.6}\n"));
    }
    let shared_accuracy = shared_head_evaluate(&backbone, &shared, &eval_set)?.accuracy;
    let (_, _, shared_report) = shared_head_unlearn(
        &shared,
        &data.private,
        &backbone,
        &config.tune,
        config.global_seed,
        &removal,
    )?;
    push_row(
        CompareRow {
            method: "shared_head".into(),
            accuracy: shared_accuracy,
            retrained_params: shared_report.retrained_param_count,
            retrained_data: shared_report.retrained_data_count,
            unlearn_seconds: shared_report.elapsed_seconds,
        },
        &mut table_tsv,
        sink,
        &mut rows,
    )?;

    let accuracy_curves_path = out_dir.join("accuracy_curves.tsv");
    std::fs::write(&accuracy_curves_path, curves)?;

    // Cost reference: what one request retrains under each regime, with a
    // full retrain of backbone plus all pairs as the ceiling.
    let mut cost = String::from("method\tretrained_params\n");
    cost.push_str(&format!("full_retrain\t{}\n", adaptive.total_param_count()));
    cost.push_str(&format!("adaptive\t{}\n", adaptive.pair_param_count()));
    cost.push_str(&format!("single_prompt\t{}\n", single_pair.param_count()));
    cost.push_str(&format!("random_partition\t{}\n", random.pair_param_count()));
    cost.push_str(&format!(
        "shared_head\t{}\n",
        shared_report.retrained_param_count
    ));
    let cost_reference_path = out_dir.join("cost_reference.tsv");
    std::fs::write(&cost_reference_path, cost)?;

    Ok(CompareOutcome { rows, table_tsv, accuracy_curves_path, cost_reference_path })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn versioned_names_strip_old_versions() {
        let p = versioned_sibling(Path::new("/tmp/run/state.v3.lmer"), None, 4);
        assert_eq!(p, PathBuf::from("/tmp/run/state.v4.lmer"));
        let q = versioned_sibling(Path::new("/tmp/run/model.lmer"), None, 2);
        assert_eq!(q, PathBuf::from("/tmp/run/model.v2.lmer"));
        let r = versioned_sibling(Path::new("/tmp/run/state.v1.lmer"), Some(Path::new("/elsewhere")), 2);
        assert_eq!(r, PathBuf::from("/elsewhere/state.v2.lmer"));
    }

    #[test]
    fn synthetic_split_respects_per_class_counts() {
        let config = Config::parse_str(
            "dataset.classes=3\ndataset.per_class=6\ndataset.test_per_class=2\ndataset.shape=2x2x1",
        )
        .unwrap();
        let data = build_datasets(&config).unwrap();
        let test = data.test.unwrap();
        assert_eq!(data.public.len() + data.private.len(), 18);
        assert_eq!(test.len(), 6);
        let mut per_class = vec![0usize; 3];
        for img in &test.images {
            per_class[img.label] += 1;
        }
        assert_eq!(per_class, vec![2, 2, 2]);
        // Train and test ids are disjoint.
        let train_ids: BTreeSet<u64> =
            data.public.ids().union(&data.private.ids()).cloned().collect();
        assert!(train_ids.is_disjoint(&test.ids()));
    }
}
