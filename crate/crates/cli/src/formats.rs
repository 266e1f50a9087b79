//! File formats built on the [`crate::container`] layout: model checkpoints,
//! feature caches, reference pools, and embedding tables.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use siamrae_core::detection::ReferencePool;
use siamrae_core::features::{FbankConfig, Normalizer, SegmentFeatures};
use siamrae_core::rae::{Embedding, ModelConfig, RaeModel};
use siamrae_core::Mat;

use crate::container::{Container, Tensor};

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"SRAECKPT";
pub const FEATURES_MAGIC: [u8; 8] = *b"SRAEFEAT";
pub const POOL_MAGIC: [u8; 8] = *b"SRAEPOOL";
pub const EMBEDDINGS_MAGIC: [u8; 8] = *b"SRAEEMBS";

/// Structured text header of a checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub tool_version: String,
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fbank: Option<FbankConfig>,
}

/// Everything needed to run inference: the model plus the frozen training
/// normalizer (and the filterbank settings when features come from audio).
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: RaeModel,
    pub normalizer: Option<Normalizer>,
    pub fbank: Option<FbankConfig>,
}

/// Model parameters go to disk as little-endian f32 tensors named by the
/// layout; the normalizer keeps f64. Deterministic, so equal models produce
/// byte-identical files.
pub fn save_checkpoint(
    path: &Path,
    model: &RaeModel,
    normalizer: Option<&Normalizer>,
    fbank: Option<&FbankConfig>,
) -> Result<()> {
    let mut c = Container::new(CHECKPOINT_MAGIC);
    c.meta = toml::to_string(&CheckpointMeta {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        model: model.config().clone(),
        fbank: fbank.cloned(),
    })
    .context("serializing checkpoint header")?;
    for spec in model.layout().specs() {
        let (rows, cols, data) = model.tensor(&spec.name).expect("spec names its tensor");
        c.tensors.push(Tensor::f32(&spec.name, rows, cols, data.to_vec()));
    }
    if let Some(norm) = normalizer {
        let f = norm.mean.len();
        c.tensors.push(Tensor::f64("norm.mean", 1, f, norm.mean.clone()));
        c.tensors.push(Tensor::f64("norm.std", 1, f, norm.std.clone()));
    }
    c.write_to(path)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let c = Container::read_from(path, CHECKPOINT_MAGIC)?;
    let meta: CheckpointMeta = toml::from_str(&c.meta).context("parsing checkpoint header")?;
    let layout = siamrae_core::rae::ParamLayout::build(&meta.model);
    let mut params = vec![0.0f64; layout.total_params()];
    for spec in layout.specs() {
        let t = c
            .tensor(&spec.name)
            .ok_or_else(|| anyhow!("checkpoint is missing tensor {}", spec.name))?;
        if t.rows != spec.rows || t.cols != spec.cols {
            bail!(
                "checkpoint tensor {} has shape {}x{}, expected {}x{}",
                spec.name,
                t.rows,
                t.cols,
                spec.rows,
                spec.cols
            );
        }
        params[spec.range()].copy_from_slice(&t.data);
    }
    let model = RaeModel::from_params(meta.model, params).map_err(|e| anyhow!("{e}"))?;
    let normalizer = match (c.tensor("norm.mean"), c.tensor("norm.std")) {
        (Some(mean), Some(std)) => Some(Normalizer {
            mean: mean.data.clone(),
            std: std.data.clone(),
        }),
        _ => None,
    };
    Ok(Checkpoint {
        model,
        normalizer,
        fbank: meta.fbank,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FeaturesMeta {
    tool_version: String,
    feature_dim: usize,
}

/// Feature cache: per-segment f32 tensors plus aligned id/label/speaker
/// lists.
pub fn save_features(path: &Path, segments: &[SegmentFeatures]) -> Result<()> {
    let mut c = Container::new(FEATURES_MAGIC);
    let feature_dim = segments.first().map_or(0, |s| s.feature_dim());
    c.meta = toml::to_string(&FeaturesMeta {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        feature_dim,
    })?;
    let mut ids = Vec::with_capacity(segments.len());
    let mut labels = Vec::with_capacity(segments.len());
    let mut speakers = Vec::with_capacity(segments.len());
    for (i, seg) in segments.iter().enumerate() {
        ids.push(seg.segment_id.clone());
        labels.push(seg.label.clone());
        speakers.push(seg.speaker_id.clone());
        c.tensors.push(Tensor::f32(
            format!("seg.{i:06}"),
            seg.len(),
            seg.feature_dim(),
            seg.frames.as_slice().to_vec(),
        ));
    }
    c.lists.push(("segment_id".into(), ids));
    c.lists.push(("label".into(), labels));
    c.lists.push(("speaker_id".into(), speakers));
    c.write_to(path)
}

pub fn load_features(path: &Path) -> Result<Vec<SegmentFeatures>> {
    let c = Container::read_from(path, FEATURES_MAGIC)?;
    let ids = c.list("segment_id").context("missing segment_id list")?;
    let labels = c.list("label").context("missing label list")?;
    let speakers = c.list("speaker_id").context("missing speaker_id list")?;
    if ids.len() != labels.len() || ids.len() != speakers.len() {
        bail!("feature container lists are misaligned");
    }
    let mut out = Vec::with_capacity(ids.len());
    for i in 0..ids.len() {
        let t = c
            .tensor(&format!("seg.{i:06}"))
            .with_context(|| format!("missing tensor for segment {i}"))?;
        out.push(SegmentFeatures {
            frames: Mat::from_flat(t.rows, t.cols, t.data.clone()),
            segment_id: ids[i].clone(),
            label: labels[i].clone(),
            speaker_id: speakers[i].clone(),
        });
    }
    Ok(out)
}

/// Reference pool: one f64 embedding matrix and one id list per class.
pub fn save_pool(path: &Path, pool: &ReferencePool) -> Result<()> {
    let mut c = Container::new(POOL_MAGIC);
    c.meta = format!("tool_version = \"{}\"\n", env!("CARGO_PKG_VERSION"));
    let mut classes = Vec::new();
    for (class, refs) in pool.iter() {
        classes.push(class.to_string());
        let dim = refs.first().map_or(0, |(_, z)| z.dim());
        let mut flat = Vec::with_capacity(refs.len() * dim);
        let mut ids = Vec::with_capacity(refs.len());
        for (id, z) in refs {
            ids.push(id.clone());
            flat.extend_from_slice(z.values());
        }
        c.lists.push((format!("ids.{class}"), ids));
        c.tensors
            .push(Tensor::f64(format!("emb.{class}"), refs.len(), dim, flat));
    }
    c.lists.insert(0, ("classes".into(), classes));
    c.write_to(path)
}

pub fn load_pool(path: &Path) -> Result<ReferencePool> {
    let c = Container::read_from(path, POOL_MAGIC)?;
    let classes = c.list("classes").context("missing class list")?;
    let mut pool = ReferencePool::default();
    for class in classes {
        let ids = c
            .list(&format!("ids.{class}"))
            .with_context(|| format!("missing ids for class {class}"))?;
        let t = c
            .tensor(&format!("emb.{class}"))
            .with_context(|| format!("missing embeddings for class {class}"))?;
        if t.rows != ids.len() {
            bail!("class {class}: {} ids vs {} embeddings", ids.len(), t.rows);
        }
        for (i, id) in ids.iter().enumerate() {
            let values = t.data[i * t.cols..(i + 1) * t.cols].to_vec();
            let z = Embedding::from_unit(values).map_err(|e| anyhow!("{e}"))?;
            pool.insert(class.clone(), id.clone(), z)
                .map_err(|e| anyhow!("{e}"))?;
        }
    }
    Ok(pool)
}

/// Embedding table: aligned id/label lists plus one f64 matrix.
pub fn save_embeddings(
    path: &Path,
    ids: &[String],
    labels: &[String],
    embeddings: &[Embedding],
) -> Result<()> {
    let mut c = Container::new(EMBEDDINGS_MAGIC);
    c.meta = format!("tool_version = \"{}\"\n", env!("CARGO_PKG_VERSION"));
    let dim = embeddings.first().map_or(0, |z| z.dim());
    let mut flat = Vec::with_capacity(embeddings.len() * dim);
    for z in embeddings {
        flat.extend_from_slice(z.values());
    }
    c.lists.push(("segment_id".into(), ids.to_vec()));
    c.lists.push(("label".into(), labels.to_vec()));
    c.tensors
        .push(Tensor::f64("embeddings", embeddings.len(), dim, flat));
    c.write_to(path)
}

pub fn load_embeddings(path: &Path) -> Result<(Vec<String>, Vec<String>, Vec<Embedding>)> {
    let c = Container::read_from(path, EMBEDDINGS_MAGIC)?;
    let ids = c.list("segment_id").context("missing segment_id list")?.to_vec();
    let labels = c.list("label").context("missing label list")?.to_vec();
    let t = c.tensor("embeddings").context("missing embeddings tensor")?;
    if t.rows != ids.len() {
        bail!("{} ids vs {} embedding rows", ids.len(), t.rows);
    }
    let mut embeddings = Vec::with_capacity(t.rows);
    for i in 0..t.rows {
        let values = t.data[i * t.cols..(i + 1) * t.cols].to_vec();
        embeddings.push(Embedding::from_unit(values).map_err(|e| anyhow!("{e}"))?);
    }
    Ok((ids, labels, embeddings))
}
