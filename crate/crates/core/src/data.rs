//! Datasets, the public/private partition, IDX file ingestion, and the
//! synthetic image generator used for desk-scale experiments.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::{domain, stream_id, RngStream};

/// One labeled image. Pixels are row-major `H x W x C` floats in `[0, 1]`.
/// The id is stable across removals so unlearning requests can address
/// points long after training.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub id: u64,
    pub label: usize,
    pub pixels: Vec<f64>,
}

/// An ordered, immutable collection of images sharing one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub num_classes: usize,
    pub shape: (usize, usize, usize),
    pub images: Vec<LabeledImage>,
}

/// Disjoint public/private halves covering a source dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetPartition {
    pub public: Dataset,
    pub private: Dataset,
}

impl Dataset {
    /// Validates all invariants: shared shape, labels in range, strictly
    /// increasing ids, pixels finite and in `[0, 1]`.
    pub fn new(
        name: impl Into<String>,
        num_classes: usize,
        shape: (usize, usize, usize),
        images: Vec<LabeledImage>,
    ) -> Result<Self> {
        let (h, w, c) = shape;
        if h == 0 || w == 0 || c == 0 {
            return Err(Error::Domain(format!("degenerate image shape {shape:?}")));
        }
        if num_classes == 0 {
            return Err(Error::Domain("num_classes must be at least 1".into()));
        }
        let pixel_count = h * w * c;
        let mut prev_id: Option<u64> = None;
        for img in &images {
            if img.pixels.len() != pixel_count {
                return Err(Error::Shape(format!(
                    "image {} has {} pixels, expected {pixel_count}",
                    img.id,
                    img.pixels.len()
                )));
            }
            if img.label >= num_classes {
                return Err(Error::Domain(format!(
                    "image {} has label {} >= num_classes {num_classes}",
                    img.id, img.label
                )));
            }
            if img.pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::Domain(format!(
                    "image {} has pixels outside [0, 1]",
                    img.id
                )));
            }
            if let Some(p) = prev_id {
                if img.id <= p {
                    return Err(Error::Domain(format!(
                        "ids must be strictly increasing: {} after {p}",
                        img.id
                    )));
                }
            }
            prev_id = Some(img.id);
        }
        Ok(Dataset { name: name.into(), num_classes, shape, images })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn pixel_count(&self) -> usize {
        self.shape.0 * self.shape.1 * self.shape.2
    }

    pub fn ids(&self) -> BTreeSet<u64> {
        self.images.iter().map(|i| i.id).collect()
    }

    /// Lookup by id; images are ordered by id, so this is a binary search.
    pub fn get(&self, id: u64) -> Option<&LabeledImage> {
        self.images
            .binary_search_by_key(&id, |img| img.id)
            .ok()
            .map(|i| &self.images[i])
    }

    /// Seeded, per-class stratified split into public and private halves.
    ///
    /// The public half gets exactly `round(public_fraction * N)` images, and
    /// every class with at least two members lands in both halves whenever
    /// those two constraints are jointly satisfiable.
    pub fn partition(&self, public_fraction: f64, seed: u64) -> Result<DatasetPartition> {
        if self.is_empty() {
            return Err(Error::Domain("cannot partition an empty dataset".into()));
        }
        if !(public_fraction > 0.0 && public_fraction < 1.0) {
            return Err(Error::Domain(format!(
                "public_fraction must be in (0, 1), got {public_fraction}"
            )));
        }
        let n = self.len();
        let target = (public_fraction * n as f64).round() as usize;

        // Group image indexes by class, in id order.
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); self.num_classes];
        for (idx, img) in self.images.iter().enumerate() {
            by_class[img.label].push(idx);
        }

        // Largest-remainder quotas per class, then adjust to hit the exact
        // target under per-class bounds that keep both halves inhabited.
        let mut quota: Vec<usize> = Vec::with_capacity(self.num_classes);
        let mut frac: Vec<(f64, usize)> = Vec::with_capacity(self.num_classes);
        for (k, members) in by_class.iter().enumerate() {
            let share = public_fraction * members.len() as f64;
            quota.push(share.floor() as usize);
            frac.push((share - share.floor(), k));
        }
        let mut lo: Vec<usize> = by_class.iter().map(|m| usize::from(m.len() >= 2)).collect();
        let mut hi: Vec<usize> = by_class
            .iter()
            .map(|m| if m.len() >= 2 { m.len() - 1 } else { m.len() })
            .collect();
        if target < lo.iter().sum() || target > hi.iter().sum() {
            // The exact-size constraint wins when stratification is
            // infeasible (pathologically small fractions or datasets).
            for (k, members) in by_class.iter().enumerate() {
                lo[k] = 0;
                hi[k] = members.len();
            }
        }
        for k in 0..self.num_classes {
            quota[k] = quota[k].clamp(lo[k], hi[k]);
        }
        // Distribute the residue deterministically by descending fractional
        // part, class index breaking ties.
        frac.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let mut total: usize = quota.iter().sum();
        while total != target {
            let mut moved = false;
            if total < target {
                for &(_, k) in &frac {
                    if quota[k] < hi[k] {
                        quota[k] += 1;
                        total += 1;
                        moved = true;
                        break;
                    }
                }
            } else {
                for &(_, k) in frac.iter().rev() {
                    if quota[k] > lo[k] {
                        quota[k] -= 1;
                        total -= 1;
                        moved = true;
                        break;
                    }
                }
            }
            if !moved {
                return Err(Error::Domain(format!(
                    "cannot split {n} images into a public half of {target}"
                )));
            }
        }

        // Seeded per-class shuffles decide which members go public.
        let mut public_idx: BTreeSet<usize> = BTreeSet::new();
        for (k, members) in by_class.iter().enumerate() {
            let mut shuffled = members.clone();
            let mut rng = RngStream::new(seed, stream_id(domain::PARTITION_CLASS, k as u64));
            rng.shuffle(&mut shuffled);
            for &idx in shuffled.iter().take(quota[k]) {
                public_idx.insert(idx);
            }
        }

        let mut public_images = Vec::with_capacity(target);
        let mut private_images = Vec::with_capacity(n - target);
        for (idx, img) in self.images.iter().enumerate() {
            if public_idx.contains(&idx) {
                public_images.push(img.clone());
            } else {
                private_images.push(img.clone());
            }
        }
        let public = Dataset::new(
            format!("{}.public", self.name),
            self.num_classes,
            self.shape,
            public_images,
        )?;
        let private = Dataset::new(
            format!("{}.private", self.name),
            self.num_classes,
            self.shape,
            private_images,
        )?;
        Ok(DatasetPartition { public, private })
    }

    /// Returns a dataset without the listed ids, survivors in original order.
    pub fn remove_points(&self, ids: &BTreeSet<u64>) -> Result<Dataset> {
        let own = self.ids();
        if let Some(missing) = ids.iter().find(|id| !own.contains(id)) {
            return Err(Error::NotFound(format!("id {missing} is not in dataset `{}`", self.name)));
        }
        let survivors: Vec<LabeledImage> = self
            .images
            .iter()
            .filter(|img| !ids.contains(&img.id))
            .cloned()
            .collect();
        Dataset::new(self.name.clone(), self.num_classes, self.shape, survivors)
    }
}

/// Deterministic synthetic dataset: one random template image per class,
/// samples are the template plus clamped Gaussian pixel noise.
pub fn generate_synthetic(
    num_classes: usize,
    per_class: usize,
    shape: (usize, usize, usize),
    noise_sigma: f64,
    seed: u64,
) -> Result<Dataset> {
    if num_classes < 2 {
        return Err(Error::Domain(format!("need at least 2 classes, got {num_classes}")));
    }
    if per_class == 0 {
        return Err(Error::Domain("per_class must be at least 1".into()));
    }
    if !(noise_sigma >= 0.0) {
        return Err(Error::Domain(format!("noise_sigma must be >= 0, got {noise_sigma}")));
    }
    let pixel_count = shape.0 * shape.1 * shape.2;
    let mut images = Vec::with_capacity(num_classes * per_class);
    let mut next_id: u64 = 0;
    for class in 0..num_classes {
        let mut template_rng = RngStream::new(seed, stream_id(domain::SYNTH_TEMPLATE, class as u64));
        let template: Vec<f64> = (0..pixel_count).map(|_| template_rng.next_f64()).collect();
        let mut noise_rng = RngStream::new(seed, stream_id(domain::SYNTH_NOISE, class as u64));
        for _ in 0..per_class {
            let pixels: Vec<f64> = template
                .iter()
                .map(|&t| (t + noise_sigma * noise_rng.next_gaussian()).clamp(0.0, 1.0))
                .collect();
            images.push(LabeledImage { id: next_id, label: class, pixels });
            next_id += 1;
        }
    }
    Dataset::new("synthetic", num_classes, shape, images)
}

const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], pos: usize) -> Result<u32> {
    let end = pos + 4;
    if end > bytes.len() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::UnexpectedEof,
            format!("truncated IDX header at byte {pos}"),
        )));
    }
    Ok(u32::from_be_bytes([bytes[pos], bytes[pos + 1], bytes[pos + 2], bytes[pos + 3]]))
}

/// Loads a grayscale image/label IDX file pair (big-endian headers,
/// unsigned-byte payloads). Pixels become `byte / 255`, ids `0..N-1` in file
/// order, and `num_classes` is one past the largest label.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let img_bytes = std::fs::read(images_path)?;
    let lbl_bytes = std::fs::read(labels_path)?;

    let magic = be_u32(&img_bytes, 0)?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::Format(format!(
            "bad image magic {magic:#010x}, expected {IDX_IMAGE_MAGIC:#010x}"
        )));
    }
    let count = be_u32(&img_bytes, 4)? as usize;
    let rows = be_u32(&img_bytes, 8)? as usize;
    let cols = be_u32(&img_bytes, 12)? as usize;
    let pixel_count = rows * cols;
    let need = 16 + count * pixel_count;
    if img_bytes.len() < need {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::UnexpectedEof,
            format!("image file has {} bytes, need {need}", img_bytes.len()),
        )));
    }

    let lbl_magic = be_u32(&lbl_bytes, 0)?;
    if lbl_magic != IDX_LABEL_MAGIC {
        return Err(Error::Format(format!(
            "bad label magic {lbl_magic:#010x}, expected {IDX_LABEL_MAGIC:#010x}"
        )));
    }
    let lbl_count = be_u32(&lbl_bytes, 4)? as usize;
    if lbl_count != count {
        return Err(Error::Format(format!(
            "image count {count} does not match label count {lbl_count}"
        )));
    }
    if lbl_bytes.len() < 8 + count {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::UnexpectedEof,
            format!("label file has {} bytes, need {}", lbl_bytes.len(), 8 + count),
        )));
    }

    let mut images = Vec::with_capacity(count);
    let mut max_label = 0usize;
    for i in 0..count {
        let label = lbl_bytes[8 + i] as usize;
        max_label = max_label.max(label);
        let start = 16 + i * pixel_count;
        let pixels: Vec<f64> = img_bytes[start..start + pixel_count]
            .iter()
            .map(|&b| b as f64 / 255.0)
            .collect();
        images.push(LabeledImage { id: i as u64, label, pixels });
    }
    Dataset::new(
        images_path.file_stem().and_then(|s| s.to_str()).unwrap_or("idx").to_string(),
        max_label + 1,
        (rows, cols, 1),
        images,
    )
}

/// Writes a dataset back out as an IDX image/label pair. Only single-channel
/// data can be represented; pixels are quantized to the nearest byte, so a
/// load/save cycle is byte-identical.
pub fn save_idx(dataset: &Dataset, images_path: &Path, labels_path: &Path) -> Result<()> {
    let (rows, cols, channels) = dataset.shape;
    if channels != 1 {
        return Err(Error::Domain(format!(
            "IDX files are single-channel, dataset has {channels} channels"
        )));
    }
    if dataset.num_classes > 256 {
        return Err(Error::Domain("IDX labels are single bytes".into()));
    }
    let mut img_bytes = Vec::with_capacity(16 + dataset.len() * rows * cols);
    img_bytes.extend_from_slice(&IDX_IMAGE_MAGIC.to_be_bytes());
    img_bytes.extend_from_slice(&(dataset.len() as u32).to_be_bytes());
    img_bytes.extend_from_slice(&(rows as u32).to_be_bytes());
    img_bytes.extend_from_slice(&(cols as u32).to_be_bytes());
    let mut lbl_bytes = Vec::with_capacity(8 + dataset.len());
    lbl_bytes.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
    lbl_bytes.extend_from_slice(&(dataset.len() as u32).to_be_bytes());
    for img in &dataset.images {
        for &p in &img.pixels {
            img_bytes.push((p * 255.0).round() as u8);
        }
        lbl_bytes.push(img.label as u8);
    }
    std::fs::write(images_path, img_bytes)?;
    std::fs::write(labels_path, lbl_bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::euclidean_distance;

    fn tiny_dataset(n: usize, classes: usize) -> Dataset {
        let images = (0..n)
            .map(|i| LabeledImage {
                id: i as u64,
                label: i % classes,
                pixels: vec![(i % 7) as f64 / 7.0],
            })
            .collect();
        Dataset::new("tiny", classes, (1, 1, 1), images).unwrap()
    }

    #[test]
    fn partition_exact_half() {
        let d = tiny_dataset(10, 2);
        let p = d.partition(0.5, 1).unwrap();
        assert_eq!(p.public.len(), 5);
        assert_eq!(p.private.len(), 5);
        let pub_ids = p.public.ids();
        let priv_ids = p.private.ids();
        assert!(pub_ids.is_disjoint(&priv_ids));
        let union: BTreeSet<u64> = pub_ids.union(&priv_ids).cloned().collect();
        assert_eq!(union, d.ids());
    }

    #[test]
    fn partition_is_deterministic() {
        let d = tiny_dataset(37, 3);
        let a = d.partition(0.4, 99).unwrap();
        let b = d.partition(0.4, 99).unwrap();
        assert_eq!(a, b);
        let c = d.partition(0.4, 100).unwrap();
        assert_ne!(a.public.ids(), c.public.ids());
    }

    #[test]
    fn partition_stratifies_large_dataset() {
        // Shaped after a 60k/10-class image corpus at an 80/20 split.
        let d = tiny_dataset(60_000, 10);
        let p = d.partition(0.8, 7).unwrap();
        assert_eq!(p.public.len(), 48_000);
        // Independent per-class counting oracle.
        let mut pub_counts = vec![0usize; 10];
        for img in &p.public.images {
            pub_counts[img.label] += 1;
        }
        let mut priv_counts = vec![0usize; 10];
        for img in &p.private.images {
            priv_counts[img.label] += 1;
        }
        for k in 0..10 {
            assert_eq!(pub_counts[k] + priv_counts[k], 6000);
            assert!((pub_counts[k] as i64 - 4800).abs() <= 1, "class {k}: {}", pub_counts[k]);
        }
    }

    #[test]
    fn partition_property_disjoint_and_covering() {
        let mut rng = crate::rng::RngStream::new(2024, 0);
        for trial in 0..60 {
            let classes = 2 + (rng.next_below(5) as usize);
            // Sizes and fractions that make per-class stratification feasible.
            let n = classes * (10 + rng.next_below(30) as usize);
            let fraction = rng.uniform_in(0.2, 0.8);
            let d = tiny_dataset(n, classes);
            let p = d.partition(fraction, trial).unwrap();
            assert_eq!(p.public.len(), (fraction * n as f64).round() as usize);
            let pub_ids = p.public.ids();
            let priv_ids = p.private.ids();
            assert!(pub_ids.is_disjoint(&priv_ids));
            assert_eq!(pub_ids.len() + priv_ids.len(), n);
            let mut in_pub = vec![false; classes];
            let mut in_priv = vec![false; classes];
            for img in &p.public.images {
                in_pub[img.label] = true;
            }
            for img in &p.private.images {
                in_priv[img.label] = true;
            }
            for k in 0..classes {
                assert!(in_pub[k] && in_priv[k], "class {k} missing from a half");
            }
        }
    }

    #[test]
    fn partition_rejects_bad_inputs() {
        let d = tiny_dataset(4, 2);
        assert!(matches!(d.partition(0.0, 1), Err(Error::Domain(_))));
        assert!(matches!(d.partition(1.0, 1), Err(Error::Domain(_))));
        let empty = Dataset::new("e", 2, (1, 1, 1), vec![]).unwrap();
        assert!(matches!(empty.partition(0.5, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn synthetic_zero_noise_repeats_template() {
        let d = generate_synthetic(3, 4, (2, 2, 1), 0.0, 5).unwrap();
        for class in 0..3 {
            let members: Vec<&LabeledImage> =
                d.images.iter().filter(|i| i.label == class).collect();
            assert_eq!(members.len(), 4);
            for m in &members[1..] {
                assert_eq!(m.pixels, members[0].pixels);
            }
        }
    }

    #[test]
    fn synthetic_is_deterministic() {
        let a = generate_synthetic(4, 10, (3, 3, 1), 0.2, 77).unwrap();
        let b = generate_synthetic(4, 10, (3, 3, 1), 0.2, 77).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn synthetic_classes_separate_under_noise() {
        let d = generate_synthetic(8, 250, (8, 8, 1), 0.1, 11).unwrap();
        // Independent nearest-class-mean classifier in pixel space.
        let mut means = vec![vec![0.0; 64]; 8];
        let mut counts = vec![0usize; 8];
        for img in &d.images {
            counts[img.label] += 1;
            for (m, p) in means[img.label].iter_mut().zip(&img.pixels) {
                *m += p;
            }
        }
        for (mean, count) in means.iter_mut().zip(&counts) {
            for m in mean.iter_mut() {
                *m /= *count as f64;
            }
        }
        let mut correct = 0usize;
        for img in &d.images {
            let mut best = (f64::INFINITY, 0usize);
            for (k, mean) in means.iter().enumerate() {
                let dist = euclidean_distance(&img.pixels, mean).unwrap();
                if dist < best.0 {
                    best = (dist, k);
                }
            }
            if best.1 == img.label {
                correct += 1;
            }
        }
        let accuracy = correct as f64 / d.len() as f64;
        assert!(accuracy >= 0.99, "nearest-template accuracy {accuracy}");
    }

    #[test]
    fn synthetic_rejects_bad_inputs() {
        assert!(generate_synthetic(1, 5, (2, 2, 1), 0.1, 0).is_err());
        assert!(generate_synthetic(3, 0, (2, 2, 1), 0.1, 0).is_err());
        assert!(generate_synthetic(3, 5, (2, 2, 1), -0.1, 0).is_err());
    }

    #[test]
    fn remove_points_basics() {
        let d = tiny_dataset(100, 4);
        assert_eq!(d.remove_points(&BTreeSet::new()).unwrap(), d);
        let all = d.ids();
        assert!(d.remove_points(&all).unwrap().is_empty());

        let removed: BTreeSet<u64> = [3, 17, 21, 40, 77, 90, 99].into_iter().collect();
        let survivors = d.remove_points(&removed).unwrap();
        assert_eq!(survivors.len(), 93);
        let expected: BTreeSet<u64> = all.difference(&removed).cloned().collect();
        assert_eq!(survivors.ids(), expected);
        // Idempotent once the removed ids are gone.
        let again: BTreeSet<u64> =
            removed.intersection(&survivors.ids()).cloned().collect();
        assert_eq!(survivors.remove_points(&again).unwrap(), survivors);
    }

    #[test]
    fn remove_points_unknown_id() {
        let d = tiny_dataset(5, 2);
        let missing: BTreeSet<u64> = [42].into_iter().collect();
        match d.remove_points(&missing) {
            Err(Error::NotFound(msg)) => assert!(msg.contains("42")),
            other => panic!("expected NotFound, got {other:?}"),
        }
    }

    #[test]
    fn idx_roundtrip_on_hand_built_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let img_path = dir.path().join("images.idx");
        let lbl_path = dir.path().join("labels.idx");

        let mut img_bytes = Vec::new();
        img_bytes.extend_from_slice(&0x0000_0803u32.to_be_bytes());
        img_bytes.extend_from_slice(&2u32.to_be_bytes());
        img_bytes.extend_from_slice(&2u32.to_be_bytes());
        img_bytes.extend_from_slice(&2u32.to_be_bytes());
        img_bytes.extend_from_slice(&[0, 255, 128, 64, 10, 20, 30, 40]);
        let mut lbl_bytes = Vec::new();
        lbl_bytes.extend_from_slice(&0x0000_0801u32.to_be_bytes());
        lbl_bytes.extend_from_slice(&2u32.to_be_bytes());
        lbl_bytes.extend_from_slice(&[1, 0]);
        std::fs::write(&img_path, &img_bytes).unwrap();
        std::fs::write(&lbl_path, &lbl_bytes).unwrap();

        let d = load_idx(&img_path, &lbl_path).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.shape, (2, 2, 1));
        assert_eq!(d.num_classes, 2);
        assert_eq!(d.images[0].pixels, vec![0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
        assert_eq!(d.images[0].label, 1);
        assert_eq!(d.images[1].label, 0);
        assert_eq!(d.images[0].id, 0);
        assert_eq!(d.images[1].id, 1);

        let img_out = dir.path().join("images2.idx");
        let lbl_out = dir.path().join("labels2.idx");
        save_idx(&d, &img_out, &lbl_out).unwrap();
        assert_eq!(std::fs::read(&img_out).unwrap(), img_bytes);
        assert_eq!(std::fs::read(&lbl_out).unwrap(), lbl_bytes);
    }

    #[test]
    fn idx_rejects_bad_magic_and_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let img_path = dir.path().join("bad.idx");
        let lbl_path = dir.path().join("bad-labels.idx");

        let mut img_bytes = Vec::new();
        img_bytes.extend_from_slice(&0x0000_0802u32.to_be_bytes());
        img_bytes.extend_from_slice(&[0; 12]);
        let mut lbl_bytes = Vec::new();
        lbl_bytes.extend_from_slice(&0x0000_0801u32.to_be_bytes());
        lbl_bytes.extend_from_slice(&0u32.to_be_bytes());
        std::fs::write(&img_path, &img_bytes).unwrap();
        std::fs::write(&lbl_path, &lbl_bytes).unwrap();
        assert!(matches!(load_idx(&img_path, &lbl_path), Err(Error::Format(_))));

        // Valid image header for 1 image, label header claiming 2.
        let mut img_ok = Vec::new();
        img_ok.extend_from_slice(&0x0000_0803u32.to_be_bytes());
        img_ok.extend_from_slice(&1u32.to_be_bytes());
        img_ok.extend_from_slice(&1u32.to_be_bytes());
        img_ok.extend_from_slice(&1u32.to_be_bytes());
        img_ok.push(5);
        let mut lbl_two = Vec::new();
        lbl_two.extend_from_slice(&0x0000_0801u32.to_be_bytes());
        lbl_two.extend_from_slice(&2u32.to_be_bytes());
        lbl_two.extend_from_slice(&[0, 1]);
        std::fs::write(&img_path, &img_ok).unwrap();
        std::fs::write(&lbl_path, &lbl_two).unwrap();
        assert!(matches!(load_idx(&img_path, &lbl_path), Err(Error::Format(_))));
    }

    #[test]
    fn idx_rejects_truncated_file() {
        let dir = tempfile::tempdir().unwrap();
        let img_path = dir.path().join("trunc.idx");
        let lbl_path = dir.path().join("trunc-labels.idx");
        let mut img_bytes = Vec::new();
        img_bytes.extend_from_slice(&0x0000_0803u32.to_be_bytes());
        img_bytes.extend_from_slice(&4u32.to_be_bytes());
        img_bytes.extend_from_slice(&2u32.to_be_bytes());
        img_bytes.extend_from_slice(&2u32.to_be_bytes());
        img_bytes.extend_from_slice(&[0, 1, 2]); // far fewer than 16 pixels
        let mut lbl_bytes = Vec::new();
        lbl_bytes.extend_from_slice(&0x0000_0801u32.to_be_bytes());
        lbl_bytes.extend_from_slice(&4u32.to_be_bytes());
        lbl_bytes.extend_from_slice(&[0, 1, 2, 3]);
        std::fs::write(&img_path, &img_bytes).unwrap();
        std::fs::write(&lbl_path, &lbl_bytes).unwrap();
        assert!(matches!(load_idx(&img_path, &lbl_path), Err(Error::Io(_))));
    }
}
