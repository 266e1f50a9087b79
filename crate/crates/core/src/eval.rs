//! Same-different evaluation: random eval/reference pairing, precision-recall
//! curves over similarity scores, and step-wise average precision.
//!
//! AP here is the exact area under the achievable operating points: the
//! ranked list is cut after each distinct score (ties enter together, ranked
//! stably by pair id), and `AP = sum_k (R_k - R_{k-1}) * P_k` over those
//! cuts with no interpolation.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::detection::{score_segment, ReferencePool};
use crate::error::{Error, Result};
use crate::features::SegmentFeatures;
use crate::rae::RaeModel;
use crate::rng;
use crate::siamese::cosine_similarity;

/// One scored pair: higher scores mean "more likely same class / typical".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub pair_id: String,
    pub score: f64,
    /// `true` for same-class / typical pairs (the positive class).
    pub label: bool,
}

/// One operating point of the precision-recall curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

fn ranked(scored: &[ScoredPair]) -> Result<Vec<&ScoredPair>> {
    if scored.is_empty() {
        return Err(Error::EmptyInput("scored pairs"));
    }
    for p in scored {
        if !p.score.is_finite() {
            return Err(Error::NonFinite(format!("score of pair {}", p.pair_id)));
        }
    }
    let mut order: Vec<&ScoredPair> = scored.iter().collect();
    order.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.pair_id.cmp(&b.pair_id))
    });
    Ok(order)
}

/// Precision-recall points, one per distinct score prefix of the ranked
/// list. Requires at least one positive label.
pub fn pr_curve(scored: &[ScoredPair]) -> Result<Vec<PrPoint>> {
    let order = ranked(scored)?;
    let total_pos = order.iter().filter(|p| p.label).count();
    if total_pos == 0 {
        return Err(Error::InsufficientData("no positive pairs".into()));
    }
    let mut points = Vec::new();
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut i = 0usize;
    while i < order.len() {
        let score = order[i].score;
        // Consume the whole tie group.
        while i < order.len() && order[i].score == score {
            if order[i].label {
                tp += 1;
            }
            seen += 1;
            i += 1;
        }
        points.push(PrPoint {
            threshold: score,
            precision: tp as f64 / seen as f64,
            recall: tp as f64 / total_pos as f64,
        });
    }
    Ok(points)
}

/// Step-wise average precision over the ranked list.
pub fn average_precision(scored: &[ScoredPair]) -> Result<f64> {
    let points = pr_curve(scored)?;
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for p in &points {
        ap += (p.recall - prev_recall) * p.precision;
        prev_recall = p.recall;
    }
    Ok(ap)
}

/// An eval/reference pairing (indices into the two segment slices).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalPair {
    pub pair_id: String,
    pub eval_index: usize,
    pub reference_index: usize,
    /// `true` iff the two segments carry the same class.
    pub same_class: bool,
}

/// Pair each eval segment with one uniformly drawn reference segment;
/// label 1 iff the classes match. Deterministic per seed; different-class
/// pairs play the role of artificial substitution errors.
pub fn make_same_different_pairs(
    eval_segments: &[SegmentFeatures],
    reference_segments: &[SegmentFeatures],
    seed: u64,
) -> Result<Vec<EvalPair>> {
    if eval_segments.is_empty() {
        return Err(Error::EmptyInput("eval segments"));
    }
    if reference_segments.is_empty() {
        return Err(Error::EmptyInput("reference segments"));
    }
    let mut rng = rng::rng_from_seed(seed);
    Ok(eval_segments
        .iter()
        .enumerate()
        .map(|(i, seg)| {
            let j = rng.gen_range(0..reference_segments.len());
            EvalPair {
                pair_id: format!(
                    "{}__{}",
                    seg.segment_id, reference_segments[j].segment_id
                ),
                eval_index: i,
                reference_index: j,
                same_class: seg.label == reference_segments[j].label,
            }
        })
        .collect())
}

/// Pooled and per-class AP of a scored pair set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApReport {
    pub pooled: f64,
    /// `(class, AP)` for classes with at least one positive pair; classes
    /// are the eval segment's label.
    pub per_class: Vec<(String, f64)>,
    pub n_pairs: usize,
    pub n_positive: usize,
}

/// Score the same-different pairing with embedding cosine similarity.
/// Returns `(eval segment class, scored pair)` per pair, in pairing order.
pub fn score_same_different_pairs(
    model: &RaeModel,
    eval_segments: &[SegmentFeatures],
    reference_segments: &[SegmentFeatures],
    seed: u64,
) -> Result<Vec<(String, ScoredPair)>> {
    let pairs = make_same_different_pairs(eval_segments, reference_segments, seed)?;

    let eval_z: Vec<_> = eval_segments
        .iter()
        .map(|s| model.encode(&s.frames))
        .collect::<Result<_>>()?;
    let ref_z: Vec<_> = reference_segments
        .iter()
        .map(|s| model.encode(&s.frames))
        .collect::<Result<_>>()?;

    pairs
        .iter()
        .map(|p| {
            let cos = cosine_similarity(
                eval_z[p.eval_index].values(),
                ref_z[p.reference_index].values(),
            )?;
            Ok((
                eval_segments[p.eval_index].label.clone(),
                ScoredPair {
                    pair_id: p.pair_id.clone(),
                    score: cos,
                    label: p.same_class,
                },
            ))
        })
        .collect()
}

/// The same-different experiment: pair eval segments with references, score
/// each pair with embedding cosine similarity, and report AP.
pub fn artificial_error_experiment(
    model: &RaeModel,
    eval_segments: &[SegmentFeatures],
    reference_segments: &[SegmentFeatures],
    seed: u64,
) -> Result<ApReport> {
    report_from_scored(score_same_different_pairs(
        model,
        eval_segments,
        reference_segments,
        seed,
    )?)
}

/// Pooled and per-class AP from `(class, scored pair)` records.
pub fn report_from_scored(scored: Vec<(String, ScoredPair)>) -> Result<ApReport> {
    let all: Vec<ScoredPair> = scored.iter().map(|(_, sp)| sp.clone()).collect();
    let pooled = average_precision(&all)?;
    let mut classes: Vec<String> = scored.iter().map(|(c, _)| c.clone()).collect();
    classes.sort();
    classes.dedup();
    let mut per_class = Vec::new();
    for class in classes {
        let subset: Vec<ScoredPair> = scored
            .iter()
            .filter(|(c, _)| *c == class)
            .map(|(_, sp)| sp.clone())
            .collect();
        if subset.iter().any(|p| p.label) {
            per_class.push((class, average_precision(&subset)?));
        }
    }
    Ok(ApReport {
        pooled,
        n_pairs: all.len(),
        n_positive: all.iter().filter(|p| p.label).count(),
        per_class,
    })
}

/// One row of the real-error table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsonantRow {
    pub phone_class: String,
    pub n_typical: usize,
    pub n_disordered: usize,
    pub n_references: usize,
    pub ap: f64,
}

/// Detection-side evaluation: score each labeled test segment against the
/// pool of its target class and compute AP per class with typical as the
/// positive. `test` items are `(segment, is_typical)`; the segment's label
/// names the *target* class even for disordered productions.
pub fn real_error_experiment(
    model: &RaeModel,
    test: &[(SegmentFeatures, bool)],
    pool: &ReferencePool,
) -> Result<Vec<ConsonantRow>> {
    if test.is_empty() {
        return Err(Error::EmptyInput("test segments"));
    }
    let mut classes: Vec<String> = test.iter().map(|(s, _)| s.label.clone()).collect();
    classes.sort();
    classes.dedup();

    let mut rows = Vec::with_capacity(classes.len());
    for class in classes {
        let mut scored = Vec::new();
        let mut n_typical = 0usize;
        let mut n_disordered = 0usize;
        for (seg, is_typical) in test.iter().filter(|(s, _)| s.label == class) {
            let result = score_segment(model, seg, pool, &class)?;
            scored.push(ScoredPair {
                pair_id: seg.segment_id.clone(),
                score: result.score,
                label: *is_typical,
            });
            if *is_typical {
                n_typical += 1;
            } else {
                n_disordered += 1;
            }
        }
        let ap = average_precision(&scored)?;
        rows.push(ConsonantRow {
            n_references: pool.class(&class).map_or(0, |r| r.len()),
            phone_class: class,
            n_typical,
            n_disordered,
            ap,
        });
    }
    Ok(rows)
}
