//! Siamese training: pair/triplet sampling, cosine-distance losses, combined
//! objectives, and the epoch loop.
//!
//! The two (or three) branches run the same [`RaeModel`]; gradients from
//! every branch accumulate into one flat buffer over the single shared
//! parameter store.
//!
//! Distance conventions follow the losses exactly as defined: the
//! contrastive loss uses `d = 1 - cos(z1, z2)` while the triplet loss uses
//! `d = 0.5 * (1 - cos)`. The scalings differ on purpose and must not be
//! unified. Hinge terms use `max(0, x)` with subgradient `0` at `x == 0`,
//! so an inactive hinge contributes exactly zero loss and zero gradient.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::SegmentFeatures;
use crate::mat::Mat;
use crate::math;
use crate::optim::{Adam, AdamConfig};
use crate::rae::{
    mse_backward, mse_loss, reverse_rows, Gradients, RaeModel,
};
use crate::rng;

/// Cosine similarity, erroring on zero-norm inputs.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            what: "cosine inputs",
            expected: a.len(),
            actual: b.len(),
        });
    }
    let na = math::norm2(a);
    let nb = math::norm2(b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(math::dot(a, b) / (na * nb))
}

/// `d = 1 - cos`, in `[0, 2]`.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(1.0 - cosine_similarity(a, b)?)
}

/// `d = 0.5 * (1 - cos)`, in `[0, 1]`; the triplet-loss distance.
pub fn half_cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(0.5 * (1.0 - cosine_similarity(a, b)?))
}

/// Cosine similarity plus its gradients with respect to both inputs.
fn cosine_with_grads(a: &[f64], b: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let na = math::norm2(a);
    let nb = math::norm2(b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    let cos = math::dot(a, b) / (na * nb);
    let mut da = vec![0.0; a.len()];
    let mut db = vec![0.0; b.len()];
    for i in 0..a.len() {
        da[i] = b[i] / (na * nb) - cos * a[i] / (na * na);
        db[i] = a[i] / (na * nb) - cos * b[i] / (nb * nb);
    }
    Ok((cos, da, db))
}

/// Contrastive loss: `0.5 y d + 0.5 (1 - y) max(0, m - d)` with
/// `d = 1 - cos(z1, z2)`.
pub fn contrastive_loss(z1: &[f64], z2: &[f64], same_class: bool, margin: f64) -> Result<f64> {
    if !(margin > 0.0) {
        return Err(Error::InvalidConfig("margin must be > 0".into()));
    }
    let d = cosine_distance(z1, z2)?;
    Ok(if same_class {
        0.5 * d
    } else if margin - d > 0.0 {
        0.5 * (margin - d)
    } else {
        0.0
    })
}

/// Triplet loss: `max(0, m + d_ap - d_an)` with half-cosine distances.
pub fn triplet_loss(z_a: &[f64], z_p: &[f64], z_n: &[f64], margin: f64) -> Result<f64> {
    if !(margin > 0.0) {
        return Err(Error::InvalidConfig("margin must be > 0".into()));
    }
    let d_ap = half_cosine_distance(z_a, z_p)?;
    let d_an = half_cosine_distance(z_a, z_n)?;
    let arg = margin + d_ap - d_an;
    Ok(if arg > 0.0 { arg } else { 0.0 })
}

/// `(1 - w) L_c + w (L_mse1 + L_mse2) / 2`.
pub fn combined_contrastive(l_c: f64, l_mse1: f64, l_mse2: f64, w: f64) -> f64 {
    (1.0 - w) * l_c + w * (l_mse1 + l_mse2) / 2.0
}

/// `(1 - w) L_t + w (L_mse_a + L_mse_p + L_mse_n) / 3`.
pub fn combined_triplet(l_t: f64, l_mse_a: f64, l_mse_p: f64, l_mse_n: f64, w: f64) -> f64 {
    (1.0 - w) * l_t + w * (l_mse_a + l_mse_p + l_mse_n) / 3.0
}

/// A sampled training pair; indices refer into the dataset slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentPair {
    pub first: usize,
    pub second: usize,
    /// `true` iff both segments carry the same phone class (label `y = 1`).
    pub same_class: bool,
}

/// A sampled training triplet; anchor and positive share a class, the
/// negative does not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentTriplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

fn classes_of(dataset: &[SegmentFeatures]) -> Vec<(String, Vec<usize>)> {
    let mut classes: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, seg) in dataset.iter().enumerate() {
        match classes.iter_mut().find(|(label, _)| *label == seg.label) {
            Some((_, members)) => members.push(i),
            None => classes.push((seg.label.clone(), vec![i])),
        }
    }
    classes
}

/// Random pairs: each segment appears as `first` in `k` pairs, with a 50/50
/// same/different-class partner target. If a segment's class has no second
/// member, same-class draws for it are skipped and counted. Deterministic
/// per seed.
pub fn sample_pairs(
    dataset: &[SegmentFeatures],
    k: usize,
    seed: u64,
) -> Result<(Vec<SegmentPair>, usize)> {
    if k == 0 {
        return Err(Error::InvalidConfig("pairs_per_segment must be >= 1".into()));
    }
    let classes = classes_of(dataset);
    if classes.len() < 2 {
        return Err(Error::InsufficientData(
            "pair sampling needs at least 2 classes".into(),
        ));
    }
    let mut rng = rng::rng_from_seed(seed);
    let mut pairs = Vec::with_capacity(dataset.len() * k);
    let mut skipped = 0usize;
    for (i, seg) in dataset.iter().enumerate() {
        let class_idx = classes
            .iter()
            .position(|(label, _)| *label == seg.label)
            .expect("indexed above");
        let same_pool_len = classes[class_idx].1.len() - 1;
        let diff_pool_len = dataset.len() - classes[class_idx].1.len();
        let my_pos = classes[class_idx]
            .1
            .iter()
            .position(|&m| m == i)
            .expect("member of own class");
        for _ in 0..k {
            let want_same = rng.gen_bool(0.5);
            if want_same {
                if same_pool_len == 0 {
                    skipped += 1;
                    continue;
                }
                // Uniform over the class with self excluded.
                let pick = rng.gen_range(0..same_pool_len);
                let members = &classes[class_idx].1;
                let j = members[if pick >= my_pos { pick + 1 } else { pick }];
                pairs.push(SegmentPair {
                    first: i,
                    second: j,
                    same_class: true,
                });
            } else {
                let mut pick = rng.gen_range(0..diff_pool_len);
                let mut j = usize::MAX;
                for (ci, (_, members)) in classes.iter().enumerate() {
                    if ci == class_idx {
                        continue;
                    }
                    if pick < members.len() {
                        j = members[pick];
                        break;
                    }
                    pick -= members.len();
                }
                pairs.push(SegmentPair {
                    first: i,
                    second: j,
                    same_class: false,
                });
            }
        }
    }
    Ok((pairs, skipped))
}

/// Random triplets: each segment anchors `k` triplets with a uniform
/// same-class positive (excluding itself) and a uniform other-class
/// negative. Anchors from singleton classes are skipped and counted.
pub fn sample_triplets(
    dataset: &[SegmentFeatures],
    k: usize,
    seed: u64,
) -> Result<(Vec<SegmentTriplet>, usize)> {
    if k == 0 {
        return Err(Error::InvalidConfig("pairs_per_segment must be >= 1".into()));
    }
    let classes = classes_of(dataset);
    if classes.len() < 2 {
        return Err(Error::InsufficientData(
            "triplet sampling needs at least 2 classes".into(),
        ));
    }
    let mut rng = rng::rng_from_seed(seed);
    let mut triplets = Vec::with_capacity(dataset.len() * k);
    let mut skipped_anchors = 0usize;
    for (i, seg) in dataset.iter().enumerate() {
        let class_idx = classes
            .iter()
            .position(|(label, _)| *label == seg.label)
            .expect("indexed above");
        let members = &classes[class_idx].1;
        if members.len() < 2 {
            skipped_anchors += 1;
            continue;
        }
        let diff_pool_len = dataset.len() - members.len();
        for _ in 0..k {
            let pos_pick = rng.gen_range(0..members.len() - 1);
            let my_pos = members.iter().position(|&m| m == i).expect("member");
            let positive = members[if pos_pick >= my_pos { pos_pick + 1 } else { pos_pick }];

            let mut pick = rng.gen_range(0..diff_pool_len);
            let mut negative = usize::MAX;
            for (ci, (_, others)) in classes.iter().enumerate() {
                if ci == class_idx {
                    continue;
                }
                if pick < others.len() {
                    negative = others[pick];
                    break;
                }
                pick -= others.len();
            }
            triplets.push(SegmentTriplet {
                anchor: i,
                positive,
                negative,
            });
        }
    }
    Ok((triplets, skipped_anchors))
}

/// Which Siamese loss the combined objective uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Contrastive,
    Triplet,
}

/// Training recipe. Margin defaults differ per loss: `0.9` contrastive,
/// `0.25` triplet.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub margin: f64,
    /// Weight `w` on the reconstruction part of the combined objective.
    pub loss_weight: f64,
    /// How many pairs (or triplets) each segment initiates.
    pub pairs_per_segment: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    /// Reconstruct the same-class partner instead of the input. Callers
    /// must start from a pretrained standard model (warm start) when this
    /// is set.
    pub correspondence: bool,
    pub seed: u64,
}

impl TrainConfig {
    pub fn contrastive() -> Self {
        Self {
            loss: LossKind::Contrastive,
            margin: 0.9,
            loss_weight: 0.5,
            pairs_per_segment: 5,
            batch_size: 256,
            learning_rate: 1e-4,
            weight_decay: 1e-5,
            epochs: 50,
            correspondence: false,
            seed: 0,
        }
    }

    pub fn triplet() -> Self {
        Self {
            loss: LossKind::Triplet,
            margin: 0.25,
            ..Self::contrastive()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0) {
            return Err(Error::InvalidConfig("margin must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.loss_weight) {
            return Err(Error::InvalidConfig("loss_weight must lie in [0, 1]".into()));
        }
        if self.pairs_per_segment == 0 {
            return Err(Error::InvalidConfig("pairs_per_segment must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be > 0".into()));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::InvalidConfig("weight_decay must be >= 0".into()));
        }
        Ok(())
    }
}

/// Loss components of one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct LossBreakdown {
    /// The combined objective.
    pub total: f64,
    /// The Siamese term (contrastive or triplet).
    pub siamese: f64,
    /// Mean of the branch reconstruction losses.
    pub mse: f64,
}

fn scaled(mut m: Mat, s: f64) -> Mat {
    for r in 0..m.rows() {
        for v in m.row_mut(r).iter_mut() {
            *v *= s;
        }
    }
    m
}

/// Full combined contrastive objective over one pair, with optional
/// gradient accumulation. With `correspondence` set, same-class pairs
/// reconstruct each other; different-class pairs fall back to
/// self-reconstruction.
pub fn contrastive_pair_objective(
    model: &RaeModel,
    s1: &Mat,
    s2: &Mat,
    same_class: bool,
    margin: f64,
    w: f64,
    correspondence: bool,
    grads: Option<&mut Gradients>,
) -> Result<LossBreakdown> {
    let swap = correspondence && same_class;
    let (t1_raw, t2_raw) = if swap { (s2, s1) } else { (s1, s2) };
    let (t1, t2);
    let (t1_raw, t2_raw) = if model.config().reverse_decode {
        t1 = reverse_rows(t1_raw);
        t2 = reverse_rows(t2_raw);
        (&t1, &t2)
    } else {
        (t1_raw, t2_raw)
    };

    let (enc1, z1) = model.encode_traced(s1)?;
    let (enc2, z2) = model.encode_traced(s2)?;
    let (dec1, r1) = model.decode_traced(&z1, t1_raw.rows())?;
    let (dec2, r2) = model.decode_traced(&z2, t2_raw.rows())?;
    let l1 = mse_loss(t1_raw, &r1)?;
    let l2 = mse_loss(t2_raw, &r2)?;

    let (cos, dcos1, dcos2) = cosine_with_grads(z1.values(), z2.values())?;
    let d = 1.0 - cos;
    let (l_c, dl_dd) = if same_class {
        (0.5 * d, 0.5)
    } else if margin - d > 0.0 {
        (0.5 * (margin - d), -0.5)
    } else {
        (0.0, 0.0)
    };

    let total = combined_contrastive(l_c, l1, l2, w);
    if let Some(grads) = grads {
        // d total / d z_i = (1 - w) * dl_dd * (-dcos_i)
        let seed = -(1.0 - w) * dl_dd;
        let dz1: Vec<f64> = dcos1.iter().map(|g| seed * g).collect();
        let dz2: Vec<f64> = dcos2.iter().map(|g| seed * g).collect();
        let dr1 = scaled(mse_backward(t1_raw, &r1)?, w * 0.5);
        let dr2 = scaled(mse_backward(t2_raw, &r2)?, w * 0.5);
        model.backward_branch(&enc1, Some((&dec1, &dr1)), Some(&dz1), grads)?;
        model.backward_branch(&enc2, Some((&dec2, &dr2)), Some(&dz2), grads)?;
    }
    Ok(LossBreakdown {
        total,
        siamese: l_c,
        mse: (l1 + l2) / 2.0,
    })
}

/// Full combined triplet objective over one triplet, with optional gradient
/// accumulation. With `correspondence` set, anchor and positive reconstruct
/// each other; the negative reconstructs itself.
#[allow(clippy::too_many_arguments)]
pub fn triplet_objective(
    model: &RaeModel,
    s_a: &Mat,
    s_p: &Mat,
    s_n: &Mat,
    margin: f64,
    w: f64,
    correspondence: bool,
    grads: Option<&mut Gradients>,
) -> Result<LossBreakdown> {
    let (ta_raw, tp_raw) = if correspondence { (s_p, s_a) } else { (s_a, s_p) };
    let (ta, tp, tn);
    let (ta_raw, tp_raw, tn_raw) = if model.config().reverse_decode {
        ta = reverse_rows(ta_raw);
        tp = reverse_rows(tp_raw);
        tn = reverse_rows(s_n);
        (&ta, &tp, &tn)
    } else {
        (ta_raw, tp_raw, s_n)
    };

    let (enc_a, z_a) = model.encode_traced(s_a)?;
    let (enc_p, z_p) = model.encode_traced(s_p)?;
    let (enc_n, z_n) = model.encode_traced(s_n)?;
    let (dec_a, r_a) = model.decode_traced(&z_a, ta_raw.rows())?;
    let (dec_p, r_p) = model.decode_traced(&z_p, tp_raw.rows())?;
    let (dec_n, r_n) = model.decode_traced(&z_n, tn_raw.rows())?;
    let l_a = mse_loss(ta_raw, &r_a)?;
    let l_p = mse_loss(tp_raw, &r_p)?;
    let l_n = mse_loss(tn_raw, &r_n)?;

    let (cos_ap, dcos_ap_a, dcos_ap_p) = cosine_with_grads(z_a.values(), z_p.values())?;
    let (cos_an, dcos_an_a, dcos_an_n) = cosine_with_grads(z_a.values(), z_n.values())?;
    let d_ap = 0.5 * (1.0 - cos_ap);
    let d_an = 0.5 * (1.0 - cos_an);
    let arg = margin + d_ap - d_an;
    let active = arg > 0.0;
    let l_t = if active { arg } else { 0.0 };

    let total = combined_triplet(l_t, l_a, l_p, l_n, w);
    if let Some(grads) = grads {
        let gate = if active { 1.0 - w } else { 0.0 };
        // d d_ap / dz = -0.5 dcos_ap; d(-d_an)/dz = +0.5 dcos_an.
        let dz_a: Vec<f64> = dcos_ap_a
            .iter()
            .zip(&dcos_an_a)
            .map(|(ap, an)| gate * (-0.5 * ap + 0.5 * an))
            .collect();
        let dz_p: Vec<f64> = dcos_ap_p.iter().map(|g| gate * -0.5 * g).collect();
        let dz_n: Vec<f64> = dcos_an_n.iter().map(|g| gate * 0.5 * g).collect();
        let third = w / 3.0;
        let dr_a = scaled(mse_backward(ta_raw, &r_a)?, third);
        let dr_p = scaled(mse_backward(tp_raw, &r_p)?, third);
        let dr_n = scaled(mse_backward(tn_raw, &r_n)?, third);
        model.backward_branch(&enc_a, Some((&dec_a, &dr_a)), Some(&dz_a), grads)?;
        model.backward_branch(&enc_p, Some((&dec_p, &dr_p)), Some(&dz_p), grads)?;
        model.backward_branch(&enc_n, Some((&dec_n, &dr_n)), Some(&dz_n), grads)?;
    }
    Ok(LossBreakdown {
        total,
        siamese: l_t,
        mse: (l_a + l_p + l_n) / 3.0,
    })
}

/// Per-epoch mean losses.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss_total: f64,
    pub loss_siamese: f64,
    pub loss_mse: f64,
}

/// Train in place; returns per-epoch stats.
pub fn train(
    model: &mut RaeModel,
    dataset: &[SegmentFeatures],
    cfg: &TrainConfig,
) -> Result<Vec<EpochStats>> {
    train_observed(model, dataset, cfg, |_, _| {})
}

/// [`train`] with a per-epoch callback (checkpointing, logging, timing).
///
/// Epoch flow: items are sampled once up front, reshuffled each epoch with
/// an epoch-derived seed, and consumed in batches. Each batch accumulates
/// branch gradients over its items, divides by the batch length (the batch
/// loss is the mean over items of per-segment sums), and takes one Adam
/// step. Seed derivation order from `cfg.seed`: (1) the sampling seed,
/// (2) one shuffle seed per epoch.
pub fn train_observed(
    model: &mut RaeModel,
    dataset: &[SegmentFeatures],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&RaeModel, &EpochStats),
) -> Result<Vec<EpochStats>> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyInput("training dataset"));
    }
    for seg in dataset {
        if seg.feature_dim() != model.config().feature_dim {
            return Err(Error::DimensionMismatch {
                what: "training segment feature dim",
                expected: model.config().feature_dim,
                actual: seg.feature_dim(),
            });
        }
    }

    let mut master = rng::rng_from_seed(cfg.seed);
    let sampling_seed = master.gen::<u64>();

    enum Items {
        Pairs(Vec<SegmentPair>),
        Triplets(Vec<SegmentTriplet>),
    }
    let mut items = match cfg.loss {
        LossKind::Contrastive => Items::Pairs(sample_pairs(dataset, cfg.pairs_per_segment, sampling_seed)?.0),
        LossKind::Triplet => {
            Items::Triplets(sample_triplets(dataset, cfg.pairs_per_segment, sampling_seed)?.0)
        }
    };
    let n_items = match &items {
        Items::Pairs(p) => p.len(),
        Items::Triplets(t) => t.len(),
    };
    if n_items == 0 {
        return Err(Error::InsufficientData(
            "sampling produced no training items".into(),
        ));
    }

    let mut adam = Adam::new(
        model.num_params(),
        AdamConfig {
            learning_rate: cfg.learning_rate,
            weight_decay: cfg.weight_decay,
            ..AdamConfig::default()
        },
    )?;
    let mut grads = Gradients::zeros_like(model);
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut shuffle_rng = rng::derive_rng(&mut master);
        match &mut items {
            Items::Pairs(p) => p.shuffle(&mut shuffle_rng),
            Items::Triplets(t) => t.shuffle(&mut shuffle_rng),
        }

        let mut sum_total = 0.0;
        let mut sum_siamese = 0.0;
        let mut sum_mse = 0.0;
        let mut batch_start = 0usize;
        let mut batch_index = 0usize;
        while batch_start < n_items {
            let batch_end = (batch_start + cfg.batch_size).min(n_items);
            let batch_len = batch_end - batch_start;
            grads.zero();
            for idx in batch_start..batch_end {
                let parts = match &items {
                    Items::Pairs(pairs) => {
                        let pair = pairs[idx];
                        contrastive_pair_objective(
                            model,
                            &dataset[pair.first].frames,
                            &dataset[pair.second].frames,
                            pair.same_class,
                            cfg.margin,
                            cfg.loss_weight,
                            cfg.correspondence,
                            Some(&mut grads),
                        )?
                    }
                    Items::Triplets(triplets) => {
                        let trip = triplets[idx];
                        triplet_objective(
                            model,
                            &dataset[trip.anchor].frames,
                            &dataset[trip.positive].frames,
                            &dataset[trip.negative].frames,
                            cfg.margin,
                            cfg.loss_weight,
                            cfg.correspondence,
                            Some(&mut grads),
                        )?
                    }
                };
                if !parts.total.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "loss diverged at epoch {epoch}, batch {batch_index}"
                    )));
                }
                sum_total += parts.total;
                sum_siamese += parts.siamese;
                sum_mse += parts.mse;
            }
            grads.scale(1.0 / batch_len as f64);
            adam.step(model.params_mut(), grads.as_slice());
            batch_start = batch_end;
            batch_index += 1;
        }

        let stats = EpochStats {
            epoch,
            loss_total: sum_total / n_items as f64,
            loss_siamese: sum_siamese / n_items as f64,
            loss_mse: sum_mse / n_items as f64,
        };
        on_epoch(model, &stats);
        history.push(stats);
    }
    Ok(history)
}
