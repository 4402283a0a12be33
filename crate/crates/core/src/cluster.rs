//! Adaptive private-data clustering.
//!
//! A seeded sample of the private data is embedded with the frozen backbone,
//! agglomeratively clustered with average linkage until the closest pair of
//! clusters is farther apart than the threshold `t`, and summarized by mean
//! prototypes. Every unsampled point is then assigned to its nearest
//! prototype. The sample is recorded so that unlearning can re-run the exact
//! same procedure on the surviving sample.

use std::collections::BTreeSet;

use crate::backbone::BackboneModel;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::num::{euclidean_distance, FeatureVector};
use crate::rng::{domain, stream_id, RngStream};

/// Symmetric pairwise distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_features(features: &[FeatureVector]) -> Result<Self> {
        let n = features.len();
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = euclidean_distance(&features[i], &features[j])?;
                entries[i * n + j] = d;
                entries[j * n + i] = d;
            }
        }
        Ok(DistanceMatrix { n, entries })
    }

    /// Validates symmetry, non-negativity, and the zero diagonal.
    pub fn from_entries(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::Shape(format!(
                "need {n}x{n} = {} entries, got {}",
                n * n,
                entries.len()
            )));
        }
        for i in 0..n {
            if entries[i * n + i] != 0.0 {
                return Err(Error::Domain(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let v = entries[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Domain(format!("invalid distance at ({i}, {j}): {v}")));
                }
                if v != entries[j * n + i] {
                    return Err(Error::Domain(format!("matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(DistanceMatrix { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }
}

/// One cluster of private points. `sampled_member_ids` are the members that
/// participated in agglomeration; the prototype is their feature mean and is
/// never updated by later assignments.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub cluster_id: usize,
    pub member_ids: BTreeSet<u64>,
    pub sampled_member_ids: BTreeSet<u64>,
    pub prototype: FeatureVector,
}

/// Complete clustering state, including the recorded sample that unlearning
/// re-uses.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub clusters: Vec<Cluster>,
    pub threshold: f64,
    pub sample_ids: BTreeSet<u64>,
    pub sample_size: usize,
    pub seed: u64,
}

impl ClusterModel {
    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    /// Cluster containing the given private id, if any.
    pub fn cluster_of(&self, id: u64) -> Option<usize> {
        self.clusters
            .iter()
            .find(|c| c.member_ids.contains(&id))
            .map(|c| c.cluster_id)
    }

    pub fn prototypes(&self) -> Vec<&FeatureVector> {
        self.clusters.iter().map(|c| &c.prototype).collect()
    }

    /// Checks the partition and bookkeeping invariants against a dataset.
    pub fn validate(&self, private: &Dataset) -> Result<()> {
        let mut seen: BTreeSet<u64> = BTreeSet::new();
        for (i, c) in self.clusters.iter().enumerate() {
            if c.cluster_id != i {
                return Err(Error::State(format!("cluster {i} carries id {}", c.cluster_id)));
            }
            if c.member_ids.is_empty() {
                return Err(Error::State(format!("cluster {i} is empty")));
            }
            if !c.sampled_member_ids.is_subset(&c.member_ids) {
                return Err(Error::State(format!("cluster {i} has sampled non-members")));
            }
            for id in &c.member_ids {
                if !seen.insert(*id) {
                    return Err(Error::State(format!("id {id} appears in two clusters")));
                }
            }
        }
        if seen != private.ids() {
            return Err(Error::State("clusters do not partition the private ids".into()));
        }
        if self.sample_size != self.sample_ids.len() {
            return Err(Error::State("sample_size disagrees with the recorded sample".into()));
        }
        Ok(())
    }
}

/// Uniform sample of ids without replacement, via a seeded shuffle.
pub fn random_sample(private: &Dataset, sample_size: usize, seed: u64) -> Result<BTreeSet<u64>> {
    if sample_size == 0 || sample_size > private.len() {
        return Err(Error::Domain(format!(
            "sample_size {sample_size} out of range for {} points",
            private.len()
        )));
    }
    let mut ids: Vec<u64> = private.images.iter().map(|i| i.id).collect();
    let mut rng = RngStream::new(seed, stream_id(domain::CLUSTER_SAMPLE, 0));
    rng.shuffle(&mut ids);
    Ok(ids.into_iter().take(sample_size).collect())
}

struct Draft {
    rows: Vec<usize>, // matrix indexes, ascending
    min_id: u64,
}

/// Average linkage between two drafts, accumulated in canonical order: the
/// cluster with the smaller minimum id drives the outer loop.
fn linkage(dist: &DistanceMatrix, a: &Draft, b: &Draft) -> f64 {
    let (outer, inner) = if a.min_id <= b.min_id { (a, b) } else { (b, a) };
    let mut sum = 0.0;
    for &i in &outer.rows {
        for &j in &inner.rows {
            sum += dist.get(i, j);
        }
    }
    sum / (outer.rows.len() * inner.rows.len()) as f64
}

/// Agglomerative clustering with average linkage and a distance threshold.
///
/// Starts from singletons and repeatedly merges the closest pair until the
/// smallest average linkage exceeds `t` or one cluster remains. Ties on the
/// minimum are broken by the lexicographically smallest pair of cluster
/// minimum ids. The output is ordered by smallest member id.
pub fn hier_cluster(dist: &DistanceMatrix, ids: &[u64], t: f64) -> Result<Vec<BTreeSet<u64>>> {
    if dist.n() != ids.len() {
        return Err(Error::Shape(format!(
            "distance matrix is {}x{0} but {} ids were given",
            dist.n(),
            ids.len()
        )));
    }
    if !(t > 0.0) {
        return Err(Error::Domain(format!("threshold must be positive, got {t}")));
    }
    if ids.is_empty() {
        return Err(Error::Domain("cannot cluster zero points".into()));
    }

    let mut drafts: Vec<Draft> = (0..ids.len())
        .map(|i| Draft { rows: vec![i], min_id: ids[i] })
        .collect();

    while drafts.len() > 1 {
        let mut best: Option<(f64, (u64, u64), usize, usize)> = None;
        for i in 0..drafts.len() {
            for j in (i + 1)..drafts.len() {
                let d = linkage(dist, &drafts[i], &drafts[j]);
                let lo = drafts[i].min_id.min(drafts[j].min_id);
                let hi = drafts[i].min_id.max(drafts[j].min_id);
                let better = match &best {
                    None => true,
                    Some((bd, bkey, _, _)) => d < *bd || (d == *bd && (lo, hi) < *bkey),
                };
                if better {
                    best = Some((d, (lo, hi), i, j));
                }
            }
        }
        let (min_dist, _, i, j) = best.expect("at least one pair");
        if min_dist > t {
            break;
        }
        let b = drafts.swap_remove(j);
        let a = &mut drafts[i];
        a.rows.extend(b.rows);
        a.rows.sort_unstable();
        a.min_id = a.min_id.min(b.min_id);
    }

    drafts.sort_by_key(|d| d.min_id);
    Ok(drafts
        .into_iter()
        .map(|d| d.rows.into_iter().map(|r| ids[r]).collect())
        .collect())
}

/// Coordinate-wise mean of feature vectors.
pub fn compute_prototype(features: &[FeatureVector]) -> Result<FeatureVector> {
    let first = features
        .first()
        .ok_or_else(|| Error::Domain("cannot average zero features".into()))?;
    let dim = first.len();
    let mut mean = vec![0.0; dim];
    for f in features {
        if f.len() != dim {
            return Err(Error::Shape(format!(
                "feature length {} does not match {dim}",
                f.len()
            )));
        }
        for (m, v) in mean.iter_mut().zip(f) {
            *m += v;
        }
    }
    let inv = 1.0 / features.len() as f64;
    for m in mean.iter_mut() {
        *m *= inv;
    }
    Ok(mean)
}

/// Index of the nearest prototype; ties go to the smallest cluster id.
pub fn assign_to_nearest(feature: &FeatureVector, prototypes: &[&FeatureVector]) -> Result<usize> {
    if prototypes.is_empty() {
        return Err(Error::Domain("no prototypes to assign to".into()));
    }
    let mut best = (euclidean_distance(feature, prototypes[0])?, 0);
    for (k, p) in prototypes.iter().enumerate().skip(1) {
        let d = euclidean_distance(feature, p)?;
        if d < best.0 {
            best = (d, k);
        }
    }
    Ok(best.1)
}

/// Clusters the private data around a fixed, already-chosen sample. This is
/// the deterministic core shared by initial training, the retrain oracle,
/// and sampled-point unlearning.
pub fn cluster_with_pinned_sample(
    private: &Dataset,
    model: &BackboneModel,
    sample: &BTreeSet<u64>,
    t: f64,
    seed: u64,
) -> Result<ClusterModel> {
    if sample.is_empty() {
        return Err(Error::Domain("the pinned sample is empty".into()));
    }
    let private_ids = private.ids();
    if let Some(stray) = sample.iter().find(|id| !private_ids.contains(id)) {
        return Err(Error::Domain(format!("sampled id {stray} is not in the private set")));
    }

    let sample_ids: Vec<u64> = sample.iter().cloned().collect();
    let mut sample_features: Vec<FeatureVector> = Vec::with_capacity(sample_ids.len());
    for id in &sample_ids {
        let img = private.get(*id).expect("checked above");
        sample_features.push(model.extract_feature(&img.pixels)?);
    }
    let dist = DistanceMatrix::from_features(&sample_features)?;
    let groups = hier_cluster(&dist, &sample_ids, t)?;

    let mut clusters: Vec<Cluster> = Vec::with_capacity(groups.len());
    for (k, group) in groups.iter().enumerate() {
        let features: Vec<FeatureVector> = group
            .iter()
            .map(|id| {
                let row = sample_ids.binary_search(id).expect("group ids come from the sample");
                sample_features[row].clone()
            })
            .collect();
        clusters.push(Cluster {
            cluster_id: k,
            member_ids: group.clone(),
            sampled_member_ids: group.clone(),
            prototype: compute_prototype(&features)?,
        });
    }

    // Prototypes are fixed from here on; assignment never updates them.
    {
        let prototypes: Vec<FeatureVector> =
            clusters.iter().map(|c| c.prototype.clone()).collect();
        let proto_refs: Vec<&FeatureVector> = prototypes.iter().collect();
        for img in &private.images {
            if sample.contains(&img.id) {
                continue;
            }
            let f = model.extract_feature(&img.pixels)?;
            let k = assign_to_nearest(&f, &proto_refs)?;
            clusters[k].member_ids.insert(img.id);
        }
    }

    let cm = ClusterModel {
        clusters,
        threshold: t,
        sample_ids: sample.clone(),
        sample_size: sample.len(),
        seed,
    };
    cm.validate(private)?;
    Ok(cm)
}

/// The full adaptive pipeline: sample, embed, cluster, assign.
pub fn adaptive_cluster(
    private: &Dataset,
    model: &BackboneModel,
    sample_size: usize,
    t: f64,
    seed: u64,
) -> Result<ClusterModel> {
    if !model.frozen() {
        return Err(Error::State("clustering requires a frozen backbone".into()));
    }
    let sample = random_sample(private, sample_size, seed)?;
    cluster_with_pinned_sample(private, model, &sample, t, seed)
}

/// Cluster counts for a range of thresholds over one shared sample. Reused
/// by the `sweep-threshold` command.
pub fn threshold_sweep(
    private: &Dataset,
    model: &BackboneModel,
    sample_size: usize,
    seed: u64,
    thresholds: &[f64],
) -> Result<Vec<(f64, usize)>> {
    let sample = random_sample(private, sample_size, seed)?;
    let sample_ids: Vec<u64> = sample.iter().cloned().collect();
    let mut features = Vec::with_capacity(sample_ids.len());
    for id in &sample_ids {
        features.push(model.extract_feature(&private.get(*id).expect("sampled").pixels)?);
    }
    let dist = DistanceMatrix::from_features(&features)?;
    let mut rows = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let groups = hier_cluster(&dist, &sample_ids, t)?;
        rows.push((t, groups.len()));
    }
    Ok(rows)
}
