//! Atypical-segment detection: embed a test segment, compare it against the
//! reference pool of its phone class, and threshold the mean cosine
//! similarity.
//!
//! The reported score is the mean cosine *similarity* over references, so
//! "above the threshold means typical" holds literally; the per-reference
//! records keep the distances `d = 1 - cos`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::SegmentFeatures;
use crate::rae::{Embedding, RaeModel};
use crate::siamese::cosine_similarity;

/// Per-class reference embeddings, keyed by phone class.
#[derive(Debug, Clone, Default)]
pub struct ReferencePool {
    classes: BTreeMap<String, Vec<(String, Embedding)>>,
}

impl ReferencePool {
    /// Embed every reference segment once and group by class. Segment ids
    /// must be unique across the whole pool.
    pub fn build(model: &RaeModel, references: &[SegmentFeatures]) -> Result<Self> {
        let mut pool = ReferencePool::default();
        for seg in references {
            let z = model.encode(&seg.frames)?;
            pool.insert(seg.label.clone(), seg.segment_id.clone(), z)?;
        }
        Ok(pool)
    }

    /// Insert a precomputed embedding (used when loading a persisted pool).
    pub fn insert(&mut self, class: String, segment_id: String, embedding: Embedding) -> Result<()> {
        if self
            .classes
            .values()
            .flatten()
            .any(|(id, _)| *id == segment_id)
        {
            return Err(Error::DuplicateSegmentId(segment_id));
        }
        self.classes.entry(class).or_default().push((segment_id, embedding));
        Ok(())
    }

    pub fn class(&self, label: &str) -> Option<&[(String, Embedding)]> {
        self.classes.get(label).map(|v| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.classes.values().map(|v| v.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn class_sizes(&self) -> impl Iterator<Item = (&str, usize)> {
        self.classes.iter().map(|(k, v)| (k.as_str(), v.len()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[(String, Embedding)])> {
        self.classes.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

/// The binary decision of [`classify`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Typical,
    Disordered,
}

/// Scoring outcome for one test segment. `decision` appears once
/// [`classify`] has applied a threshold; at the boundary `score == threshold`
/// the segment counts as typical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub segment_id: String,
    pub phone_class: String,
    /// Mean cosine similarity against the class references, in `[-1, 1]`.
    pub score: f64,
    pub threshold: Option<f64>,
    pub decision: Option<Decision>,
    /// `(reference id, cosine distance)` per reference.
    pub per_reference: Vec<(String, f64)>,
}

/// Embed `segment` and average its cosine similarity over all references of
/// `phone_class`. The result carries no decision yet.
pub fn score_segment(
    model: &RaeModel,
    segment: &SegmentFeatures,
    pool: &ReferencePool,
    phone_class: &str,
) -> Result<DetectionResult> {
    let refs = pool
        .class(phone_class)
        .ok_or_else(|| Error::UnknownClass(phone_class.into()))?;
    if refs.is_empty() {
        return Err(Error::EmptyClass(phone_class.into()));
    }
    let z = model.encode(&segment.frames)?;
    let mut per_reference = Vec::with_capacity(refs.len());
    let mut sum_cos = 0.0;
    for (ref_id, ref_z) in refs {
        let cos = cosine_similarity(z.values(), ref_z.values())?;
        sum_cos += cos;
        per_reference.push((ref_id.clone(), 1.0 - cos));
    }
    Ok(DetectionResult {
        segment_id: segment.segment_id.clone(),
        phone_class: phone_class.into(),
        score: sum_cos / refs.len() as f64,
        threshold: None,
        decision: None,
        per_reference,
    })
}

/// Apply the decision threshold: typical iff `score >= tau`.
pub fn classify(mut result: DetectionResult, tau: f64) -> Result<DetectionResult> {
    if !(-1.0..=1.0).contains(&tau) {
        return Err(Error::InvalidConfig("threshold must lie in [-1, 1]".into()));
    }
    result.threshold = Some(tau);
    result.decision = Some(if result.score >= tau {
        Decision::Typical
    } else {
        Decision::Disordered
    });
    Ok(result)
}

/// Pick the threshold maximizing F1 on `(score, is_positive)` dev examples.
///
/// Candidates are the midpoints between adjacent distinct sorted scores;
/// positives are predicted at `score >= tau`. Ties in F1 break toward the
/// larger threshold.
pub fn calibrate_threshold(dev: &[(f64, bool)]) -> Result<f64> {
    if dev.is_empty() {
        return Err(Error::EmptyInput("calibration dev set"));
    }
    let n_pos = dev.iter().filter(|(_, y)| *y).count();
    if n_pos == 0 || n_pos == dev.len() {
        return Err(Error::SingleLabelDevSet);
    }
    let mut scores: Vec<f64> = dev.iter().map(|(s, _)| *s).collect();
    scores.sort_by(f64::total_cmp);
    scores.dedup();
    if scores.len() < 2 {
        // All scores identical; the only candidate cannot split them.
        return Err(Error::InsufficientData(
            "calibration needs at least two distinct scores".into(),
        ));
    }

    let f1_at = |tau: f64| {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fn_ = 0usize;
        for &(score, positive) in dev {
            let predicted = score >= tau;
            match (predicted, positive) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        if tp == 0 {
            0.0
        } else {
            2.0 * tp as f64 / (2.0 * tp as f64 + fp as f64 + fn_ as f64)
        }
    };

    let mut best_tau = f64::NEG_INFINITY;
    let mut best_f1 = f64::NEG_INFINITY;
    for pair in scores.windows(2) {
        let tau = 0.5 * (pair[0] + pair[1]);
        let f1 = f1_at(tau);
        if f1 >= best_f1 {
            best_f1 = f1;
            best_tau = tau;
        }
    }
    Ok(best_tau)
}
