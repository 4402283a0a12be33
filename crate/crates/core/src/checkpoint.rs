//! Versioned binary checkpoints.
//!
//! Layout: a `LMER` magic, a format version, the state version, then a
//! manifest of named sections (offset, length, SHA-256 digest) followed by
//! the section payloads. Encoding is canonical: fixed field order and
//! little-endian 64-bit floats, so equal states always produce byte-
//! identical files, and digests double as state identity.

use std::collections::BTreeSet;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::backbone::{Activation, BackboneModel, Layer, TrainConfig};
use crate::cluster::{Cluster, ClusterModel};
use crate::data::{Dataset, LabeledImage};
use crate::error::{Error, Result};
use crate::num::Matrix;
use crate::prompt::{ClassifierHead, PixelFramePrompt, PromptHeadPair, TuneConfig};
use crate::unlearn::{EraserConfig, EraserState};

pub const MAGIC: [u8; 4] = *b"LMER";
pub const FORMAT_VERSION: u32 = 1;

const SECTION_NAMES: [&str; 5] = ["config", "datasets", "backbone", "clusters", "pairs"];

// ---------------------------------------------------------------------------
// Canonical byte encoding
// ---------------------------------------------------------------------------

#[derive(Default)]
struct Enc {
    buf: Vec<u8>,
}

impl Enc {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, xs: &[f64]) {
        self.usize(xs.len());
        for &x in xs {
            self.f64(x);
        }
    }
    fn str(&mut self, s: &str) {
        self.usize(s.len());
        self.buf.extend_from_slice(s.as_bytes());
    }
    fn ids(&mut self, set: &BTreeSet<u64>) {
        self.usize(set.len());
        for &id in set {
            self.u64(id);
        }
    }
    fn bytes(&mut self, bs: &[u8]) {
        self.buf.extend_from_slice(bs);
    }
}

struct Dec<'a> {
    buf: &'a [u8],
    pos: usize,
    section: &'static str,
}

impl<'a> Dec<'a> {
    fn new(buf: &'a [u8], section: &'static str) -> Self {
        Dec { buf, pos: 0, section }
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format(format!(
                "section `{}` truncated at byte {}",
                self.section, self.pos
            )));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize> {
        Ok(self.u64()? as usize)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.usize()?;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.f64()?);
        }
        Ok(out)
    }
    fn f64s_exact(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.f64()?);
        }
        Ok(out)
    }
    fn str(&mut self) -> Result<String> {
        let n = self.usize()?;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Format(format!("invalid UTF-8 in section `{}`", self.section)))
    }
    fn ids(&mut self) -> Result<BTreeSet<u64>> {
        let n = self.usize()?;
        let mut out = BTreeSet::new();
        for _ in 0..n {
            out.insert(self.u64()?);
        }
        Ok(out)
    }
    fn done(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!(
                "section `{}` has {} trailing bytes",
                self.section,
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Section encoders/decoders
// ---------------------------------------------------------------------------

fn encode_config(config: &EraserConfig, global_seed: u64) -> Vec<u8> {
    let mut e = Enc::default();
    e.u64(global_seed);
    e.f64(config.train.learning_rate);
    e.usize(config.train.epochs);
    e.usize(config.train.batch_size);
    e.u64(config.train.seed);
    e.usize(config.train.hidden_dims.len());
    for &d in &config.train.hidden_dims {
        e.usize(d);
    }
    e.usize(config.train.feature_dim);
    e.f64(config.tune.prompt_lr);
    e.f64(config.tune.head_lr);
    e.usize(config.tune.epochs);
    e.usize(config.tune.batch_size);
    e.usize(config.tune.frame_width);
    e.f64(config.threshold);
    e.usize(config.sample_size);
    e.buf
}

fn decode_config(buf: &[u8]) -> Result<(EraserConfig, u64)> {
    let mut d = Dec::new(buf, "config");
    let global_seed = d.u64()?;
    let learning_rate = d.f64()?;
    let epochs = d.usize()?;
    let batch_size = d.usize()?;
    let seed = d.u64()?;
    let hidden_count = d.usize()?;
    let mut hidden_dims = Vec::with_capacity(hidden_count);
    for _ in 0..hidden_count {
        hidden_dims.push(d.usize()?);
    }
    let feature_dim = d.usize()?;
    let train = TrainConfig { learning_rate, epochs, batch_size, seed, hidden_dims, feature_dim };
    let tune = TuneConfig {
        prompt_lr: d.f64()?,
        head_lr: d.f64()?,
        epochs: d.usize()?,
        batch_size: d.usize()?,
        frame_width: d.usize()?,
    };
    let threshold = d.f64()?;
    let sample_size = d.usize()?;
    d.done()?;
    Ok((EraserConfig { train, tune, threshold, sample_size }, global_seed))
}

fn encode_datasets(private: &Dataset) -> Vec<u8> {
    let mut e = Enc::default();
    e.usize(1);
    e.str(&private.name);
    e.usize(private.num_classes);
    e.usize(private.shape.0);
    e.usize(private.shape.1);
    e.usize(private.shape.2);
    e.usize(private.len());
    for img in &private.images {
        e.u64(img.id);
        e.usize(img.label);
        for &p in &img.pixels {
            e.f64(p);
        }
    }
    e.buf
}

fn decode_datasets(buf: &[u8]) -> Result<Dataset> {
    let mut d = Dec::new(buf, "datasets");
    let count = d.usize()?;
    if count != 1 {
        return Err(Error::Format(format!("expected 1 dataset, found {count}")));
    }
    let name = d.str()?;
    let num_classes = d.usize()?;
    let shape = (d.usize()?, d.usize()?, d.usize()?);
    let pixel_count = shape.0 * shape.1 * shape.2;
    let n = d.usize()?;
    let mut images = Vec::with_capacity(n);
    for _ in 0..n {
        let id = d.u64()?;
        let label = d.usize()?;
        let pixels = d.f64s_exact(pixel_count)?;
        images.push(LabeledImage { id, label, pixels });
    }
    d.done()?;
    Dataset::new(name, num_classes, shape, images)
}

fn encode_backbone(model: &BackboneModel) -> Vec<u8> {
    let mut e = Enc::default();
    let shape = model.input_shape();
    e.usize(shape.0);
    e.usize(shape.1);
    e.usize(shape.2);
    e.usize(model.feature_dim());
    e.u8(model.frozen() as u8);
    e.bytes(&model.train_config_digest());
    e.usize(model.layers().len());
    for layer in model.layers() {
        e.u8(match layer.activation {
            Activation::Tanh => 0,
            Activation::Linear => 1,
        });
        e.usize(layer.weight.rows());
        e.usize(layer.weight.cols());
        for &v in layer.weight.data() {
            e.f64(v);
        }
        e.f64s(&layer.bias);
    }
    e.buf
}

fn decode_backbone(buf: &[u8]) -> Result<BackboneModel> {
    let mut d = Dec::new(buf, "backbone");
    let shape = (d.usize()?, d.usize()?, d.usize()?);
    let feature_dim = d.usize()?;
    let frozen = d.u8()? != 0;
    let digest: [u8; 32] = d.take(32)?.try_into().unwrap();
    let layer_count = d.usize()?;
    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let activation = match d.u8()? {
            0 => Activation::Tanh,
            1 => Activation::Linear,
            other => return Err(Error::Format(format!("unknown activation tag {other}"))),
        };
        let rows = d.usize()?;
        let cols = d.usize()?;
        let weight = Matrix::from_vec(rows, cols, d.f64s_exact(rows * cols)?)?;
        let bias = d.f64s()?;
        layers.push(Layer { weight, bias, activation });
    }
    d.done()?;
    let model = BackboneModel::from_parts(layers, shape, frozen, digest)?;
    if model.feature_dim() != feature_dim {
        return Err(Error::Format(format!(
            "backbone feature dim {} disagrees with recorded {feature_dim}",
            model.feature_dim()
        )));
    }
    Ok(model)
}

fn encode_clusters(clusters: &ClusterModel) -> Vec<u8> {
    let mut e = Enc::default();
    e.f64(clusters.threshold);
    e.u64(clusters.seed);
    e.usize(clusters.sample_size);
    e.ids(&clusters.sample_ids);
    e.usize(clusters.clusters.len());
    for c in &clusters.clusters {
        e.usize(c.cluster_id);
        e.ids(&c.member_ids);
        e.ids(&c.sampled_member_ids);
        e.f64s(&c.prototype);
    }
    e.buf
}

fn decode_clusters(buf: &[u8]) -> Result<ClusterModel> {
    let mut d = Dec::new(buf, "clusters");
    let threshold = d.f64()?;
    let seed = d.u64()?;
    let sample_size = d.usize()?;
    let sample_ids = d.ids()?;
    let count = d.usize()?;
    let mut clusters = Vec::with_capacity(count);
    for _ in 0..count {
        clusters.push(Cluster {
            cluster_id: d.usize()?,
            member_ids: d.ids()?,
            sampled_member_ids: d.ids()?,
            prototype: d.f64s()?,
        });
    }
    d.done()?;
    Ok(ClusterModel { clusters, threshold, sample_ids, sample_size, seed })
}

fn encode_pairs(pairs: &[PromptHeadPair]) -> Vec<u8> {
    let mut e = Enc::default();
    e.usize(pairs.len());
    for pair in pairs {
        e.usize(pair.prompt.cluster_id);
        e.u64(pair.init_seed);
        e.usize(pair.prompt.shape.0);
        e.usize(pair.prompt.shape.1);
        e.usize(pair.prompt.shape.2);
        e.usize(pair.prompt.frame_width);
        for &v in &pair.prompt.values {
            e.f64(v);
        }
        e.usize(pair.head.weight.rows());
        e.usize(pair.head.weight.cols());
        for &v in pair.head.weight.data() {
            e.f64(v);
        }
        e.f64s(&pair.head.bias);
        e.usize(pair.tune_log.len());
        for &(epoch, loss) in &pair.tune_log {
            e.usize(epoch);
            e.f64(loss);
        }
    }
    e.buf
}

fn decode_pairs(buf: &[u8]) -> Result<Vec<PromptHeadPair>> {
    let mut d = Dec::new(buf, "pairs");
    let count = d.usize()?;
    let mut pairs = Vec::with_capacity(count);
    for _ in 0..count {
        let cluster_id = d.usize()?;
        let init_seed = d.u64()?;
        let shape = (d.usize()?, d.usize()?, d.usize()?);
        let frame_width = d.usize()?;
        let values = d.f64s_exact(shape.0 * shape.1 * shape.2)?;
        let prompt = PixelFramePrompt { values, shape, frame_width, cluster_id };
        prompt.validate()?;
        let rows = d.usize()?;
        let cols = d.usize()?;
        let weight = Matrix::from_vec(rows, cols, d.f64s_exact(rows * cols)?)?;
        let bias = d.f64s()?;
        let log_len = d.usize()?;
        let mut tune_log = Vec::with_capacity(log_len);
        for _ in 0..log_len {
            tune_log.push((d.usize()?, d.f64()?));
        }
        pairs.push(PromptHeadPair {
            prompt,
            head: ClassifierHead { weight, bias, cluster_id },
            tune_log,
            init_seed,
        });
    }
    d.done()?;
    Ok(pairs)
}

fn section_payloads(state: &EraserState) -> [Vec<u8>; 5] {
    [
        encode_config(&state.config, state.global_seed),
        encode_datasets(&state.private),
        encode_backbone(&state.backbone),
        encode_clusters(&state.clusters),
        encode_pairs(&state.pairs),
    ]
}

/// Identity of everything in the state except the version counter.
pub fn state_content_digest(state: &EraserState) -> [u8; 32] {
    let mut hasher = Sha256::new();
    for payload in section_payloads(state) {
        hasher.update(&payload);
    }
    hasher.finalize().into()
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct SectionInfo {
    pub name: String,
    pub offset: u64,
    pub length: u64,
    pub digest: [u8; 32],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub format_version: u32,
    pub state_version: u64,
    pub sections: Vec<SectionInfo>,
}

/// Writes a checkpoint; equal states produce byte-identical files.
pub fn save(state: &EraserState, path: &Path) -> Result<()> {
    let payloads = section_payloads(state);
    let mut header = Enc::default();
    header.bytes(&MAGIC);
    header.u32(FORMAT_VERSION);
    header.u64(state.version);
    header.u32(SECTION_NAMES.len() as u32);
    let manifest_len: usize = SECTION_NAMES
        .iter()
        .map(|name| 1 + name.len() + 8 + 8 + 32)
        .sum();
    let mut offset = (header.buf.len() + manifest_len) as u64;
    for (name, payload) in SECTION_NAMES.iter().zip(&payloads) {
        header.u8(name.len() as u8);
        header.bytes(name.as_bytes());
        header.u64(offset);
        header.u64(payload.len() as u64);
        let digest: [u8; 32] = Sha256::digest(payload).into();
        header.bytes(&digest);
        offset += payload.len() as u64;
    }
    let mut file = header.buf;
    for payload in &payloads {
        file.extend_from_slice(payload);
    }
    std::fs::write(path, file)?;
    Ok(())
}

fn parse_manifest(bytes: &[u8]) -> Result<(Manifest, usize)> {
    let mut d = Dec::new(bytes, "header");
    let magic = d.take(4)?;
    if magic != MAGIC {
        return Err(Error::Format(format!("bad checkpoint magic {magic:02x?}")));
    }
    let format_version = u32::from_le_bytes(d.take(4)?.try_into().unwrap());
    if format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {format_version}, expected {FORMAT_VERSION}"
        )));
    }
    let state_version = d.u64()?;
    let section_count = u32::from_le_bytes(d.take(4)?.try_into().unwrap()) as usize;
    let mut sections = Vec::with_capacity(section_count);
    for _ in 0..section_count {
        let name_len = d.u8()? as usize;
        let name = String::from_utf8(d.take(name_len)?.to_vec())
            .map_err(|_| Error::Format("section name is not UTF-8".into()))?;
        let offset = d.u64()?;
        let length = d.u64()?;
        let digest: [u8; 32] = d.take(32)?.try_into().unwrap();
        sections.push(SectionInfo { name, offset, length, digest });
    }
    Ok((Manifest { format_version, state_version, sections }, d.pos))
}

/// Reads only the header and manifest.
pub fn manifest(path: &Path) -> Result<Manifest> {
    let bytes = std::fs::read(path)?;
    Ok(parse_manifest(&bytes)?.0)
}

/// Loads a checkpoint, verifying every section digest.
pub fn load(path: &Path) -> Result<EraserState> {
    let bytes = std::fs::read(path)?;
    let (manifest, _) = parse_manifest(&bytes)?;
    if manifest.sections.len() != SECTION_NAMES.len() {
        return Err(Error::Format(format!(
            "expected {} sections, found {}",
            SECTION_NAMES.len(),
            manifest.sections.len()
        )));
    }
    let mut payloads: Vec<&[u8]> = Vec::with_capacity(SECTION_NAMES.len());
    for (expected, info) in SECTION_NAMES.iter().zip(&manifest.sections) {
        if info.name != *expected {
            return Err(Error::Format(format!(
                "section `{}` where `{expected}` was expected",
                info.name
            )));
        }
        let start = info.offset as usize;
        let end = start + info.length as usize;
        if end > bytes.len() {
            return Err(Error::Format(format!("section `{}` exceeds the file", info.name)));
        }
        let payload = &bytes[start..end];
        let digest: [u8; 32] = Sha256::digest(payload).into();
        if digest != info.digest {
            return Err(Error::Format(format!(
                "section `{}` digest mismatch; the checkpoint is corrupt",
                info.name
            )));
        }
        payloads.push(payload);
    }
    let (config, global_seed) = decode_config(payloads[0])?;
    let private = decode_datasets(payloads[1])?;
    let backbone = decode_backbone(payloads[2])?;
    let clusters = decode_clusters(payloads[3])?;
    let pairs = decode_pairs(payloads[4])?;
    if pairs.len() != clusters.num_clusters() {
        return Err(Error::Format(format!(
            "{} pairs for {} clusters",
            pairs.len(),
            clusters.num_clusters()
        )));
    }
    Ok(EraserState {
        backbone,
        clusters,
        pairs,
        private,
        config,
        global_seed,
        version: manifest.state_version,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbone::pretrain;
    use crate::data::generate_synthetic;
    use crate::unlearn::{states_content_equal, unlearn};

    fn small_state(seed: u64) -> EraserState {
        let source = generate_synthetic(3, 20, (4, 4, 1), 0.1, seed).unwrap();
        let partition = source.partition(0.5, seed).unwrap();
        let config = EraserConfig {
            train: TrainConfig {
                learning_rate: 0.1,
                epochs: 4,
                batch_size: 8,
                seed: 21,
                hidden_dims: vec![8],
                feature_dim: 4,
            },
            tune: TuneConfig {
                prompt_lr: 0.1,
                head_lr: 0.1,
                epochs: 3,
                batch_size: 8,
                frame_width: 1,
            },
            threshold: 1.5,
            sample_size: 20,
        };
        let (backbone, _) = pretrain(&partition.public, &config.train).unwrap();
        EraserState::train(backbone, partition.private, config, seed, 1).unwrap()
    }

    #[test]
    fn roundtrip_reproduces_state_and_bytes() {
        let state = small_state(61);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.v1.lmer");
        save(&state, &path).unwrap();
        let loaded = load(&path).unwrap();
        assert_eq!(loaded, state);

        let again = dir.path().join("again.lmer");
        save(&loaded, &again).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }

    #[test]
    fn manifest_lists_all_sections() {
        let state = small_state(62);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.lmer");
        save(&state, &path).unwrap();
        let m = manifest(&path).unwrap();
        assert_eq!(m.format_version, FORMAT_VERSION);
        assert_eq!(m.state_version, state.version);
        let names: Vec<&str> = m.sections.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, SECTION_NAMES);
        let file_len = std::fs::read(&path).unwrap().len() as u64;
        let last = m.sections.last().unwrap();
        assert_eq!(last.offset + last.length, file_len);
    }

    #[test]
    fn corruption_is_detected() {
        let state = small_state(63);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.lmer");
        save(&state, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0x01;
        std::fs::write(&path, &bytes).unwrap();
        match load(&path) {
            Err(Error::Format(msg)) => assert!(msg.contains("digest mismatch")),
            other => panic!("expected Format error, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.lmer");
        std::fs::write(&path, b"NOPE0000000000000000").unwrap();
        assert!(matches!(load(&path), Err(Error::Format(_))));
    }

    #[test]
    fn content_digest_ignores_version_only() {
        let state = small_state(64);
        let (bumped, _) = unlearn(&state, &std::collections::BTreeSet::new()).unwrap();
        assert!(states_content_equal(&state, &bumped));
        assert_eq!(state_content_digest(&state), state_content_digest(&bumped));

        let victim = state
            .private
            .images
            .iter()
            .map(|i| i.id)
            .find(|id| {
                !state.clusters.sample_ids.contains(id)
                    && state
                        .clusters
                        .cluster_of(*id)
                        .map(|k| state.clusters.clusters[k].member_ids.len() > 1)
                        .unwrap_or(false)
            });
        if let Some(id) = victim {
            let ids = [id].into_iter().collect();
            let (changed, _) = unlearn(&state, &ids).unwrap();
            assert_ne!(state_content_digest(&state), state_content_digest(&changed));
        }
    }

    #[test]
    fn version_is_the_only_byte_difference_after_empty_unlearn() {
        let state = small_state(65);
        let (bumped, _) = unlearn(&state, &std::collections::BTreeSet::new()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.lmer");
        let b = dir.path().join("b.lmer");
        save(&state, &a).unwrap();
        save(&bumped, &b).unwrap();
        let ba = std::fs::read(&a).unwrap();
        let bb = std::fs::read(&b).unwrap();
        assert_eq!(ba.len(), bb.len());
        let diff: Vec<usize> = (0..ba.len()).filter(|&i| ba[i] != bb[i]).collect();
        // The state version is an 8-byte little-endian field at offset 8.
        assert!(!diff.is_empty());
        assert!(diff.iter().all(|&i| (8..16).contains(&i)), "diff at {diff:?}");
    }
}
