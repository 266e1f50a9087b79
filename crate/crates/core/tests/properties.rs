//! Property tests for the metric, loss, and detection invariants, with an
//! independent threshold-recount oracle for average precision.

use proptest::prelude::*;

use siamrae_core::detection::{classify, score_segment, Decision, ReferencePool};
use siamrae_core::eval::{average_precision, pr_curve, ScoredPair};
use siamrae_core::features::{fit_normalizer, synth_corpus, SegmentFeatures, SynthConfig};
use siamrae_core::rae::{mse_loss, ModelConfig, RaeModel};
use siamrae_core::rng;
use siamrae_core::siamese::{
    combined_contrastive, combined_triplet, contrastive_loss, cosine_distance, triplet_loss,
};
use siamrae_core::Mat;

/// Independent AP oracle: for every distinct score, recount TP/FP from
/// scratch with a `>= threshold` rule and integrate precision over recall
/// steps. No code or sort order shared with the implementation.
fn ap_oracle(scored: &[(f64, bool)]) -> f64 {
    let total_pos = scored.iter().filter(|(_, y)| *y).count();
    assert!(total_pos > 0);
    let mut thresholds: Vec<f64> = scored.iter().map(|(s, _)| *s).collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds.reverse();

    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for tau in thresholds {
        let tp = scored.iter().filter(|(s, y)| *y && *s >= tau).count() as f64;
        let fp = scored.iter().filter(|(s, y)| !*y && *s >= tau).count() as f64;
        let precision = tp / (tp + fp);
        let recall = tp / total_pos as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    ap
}

fn to_pairs(scored: &[(f64, bool)]) -> Vec<ScoredPair> {
    scored
        .iter()
        .enumerate()
        .map(|(i, (s, y))| ScoredPair {
            pair_id: format!("p{i:02}"),
            score: *s,
            label: *y,
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    // Ties are common on the discrete grid, so the tie-group semantics get
    // exercised as well as the generic ranking.
    #[test]
    fn ap_matches_threshold_recount_oracle(
        items in prop::collection::vec((0u8..6, any::<bool>()), 1..=8),
        force_pos in 0usize..8,
    ) {
        let mut scored: Vec<(f64, bool)> = items
            .iter()
            .map(|(s, y)| (*s as f64 / 5.0, *y))
            .collect();
        let k = force_pos % scored.len();
        scored[k].1 = true; // at least one positive
        let got = average_precision(&to_pairs(&scored)).unwrap();
        let want = ap_oracle(&scored);
        prop_assert!((got - want).abs() < 1e-12, "got {got}, oracle {want}");
    }

    #[test]
    fn ap_invariant_under_strictly_increasing_transforms(
        items in prop::collection::vec((-1.0f64..1.0, any::<bool>()), 2..=12),
        force_pos in 0usize..12,
        scale in 0.1f64..4.0,
        shift in -2.0f64..2.0,
    ) {
        let mut scored = items;
        let k = force_pos % scored.len();
        scored[k].1 = true;
        let base = average_precision(&to_pairs(&scored)).unwrap();
        let mapped: Vec<(f64, bool)> = scored
            .iter()
            .map(|(s, y)| ((scale * s + shift).exp(), *y))
            .collect();
        let got = average_precision(&to_pairs(&mapped)).unwrap();
        prop_assert!((got - base).abs() < 1e-12);
    }

    #[test]
    fn pr_values_bounded_and_recall_total(
        items in prop::collection::vec((-1.0f64..1.0, any::<bool>()), 1..=16),
        force_pos in 0usize..16,
    ) {
        let mut scored = items;
        let k = force_pos % scored.len();
        scored[k].1 = true;
        let points = pr_curve(&to_pairs(&scored)).unwrap();
        for p in &points {
            prop_assert!((0.0..=1.0).contains(&p.precision));
            prop_assert!((0.0..=1.0).contains(&p.recall));
        }
        prop_assert!((points.last().unwrap().recall - 1.0).abs() < 1e-12);
        // Recall is non-decreasing as the threshold loosens.
        for w in points.windows(2) {
            prop_assert!(w[1].recall >= w[0].recall - 1e-15);
        }
    }

    #[test]
    fn mse_nonnegative_and_zero_iff_equal(
        rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..6),
        bump in 0.001f64..1.0,
    ) {
        let a = Mat::from_rows(&rows);
        prop_assert_eq!(mse_loss(&a, &a).unwrap(), 0.0);
        let mut rows2 = rows.clone();
        rows2[0][0] += bump;
        let b = Mat::from_rows(&rows2);
        prop_assert!(mse_loss(&a, &b).unwrap() > 0.0);
    }

    #[test]
    fn losses_are_nonnegative(
        a in prop::collection::vec(-1.0f64..1.0, 4),
        b in prop::collection::vec(-1.0f64..1.0, 4),
        c in prop::collection::vec(-1.0f64..1.0, 4),
        same in any::<bool>(),
        margin in 0.05f64..1.9,
        w in 0.0f64..=1.0,
        mse1 in 0.0f64..10.0,
        mse2 in 0.0f64..10.0,
        mse3 in 0.0f64..10.0,
    ) {
        prop_assume!(a.iter().any(|v| v.abs() > 1e-6));
        prop_assume!(b.iter().any(|v| v.abs() > 1e-6));
        prop_assume!(c.iter().any(|v| v.abs() > 1e-6));
        let lc = contrastive_loss(&a, &b, same, margin).unwrap();
        prop_assert!(lc >= 0.0);
        let lt = triplet_loss(&a, &b, &c, margin).unwrap();
        prop_assert!(lt >= 0.0);
        prop_assert!(combined_contrastive(lc, mse1, mse2, w) >= 0.0);
        prop_assert!(combined_triplet(lt, mse1, mse2, mse3, w) >= 0.0);
    }

    #[test]
    fn contrastive_symmetry(
        a in prop::collection::vec(-1.0f64..1.0, 5),
        b in prop::collection::vec(-1.0f64..1.0, 5),
        same in any::<bool>(),
        margin in 0.05f64..1.9,
    ) {
        prop_assume!(a.iter().any(|v| v.abs() > 1e-6));
        prop_assume!(b.iter().any(|v| v.abs() > 1e-6));
        let ab = contrastive_loss(&a, &b, same, margin).unwrap();
        let ba = contrastive_loss(&b, &a, same, margin).unwrap();
        prop_assert_eq!(ab, ba);
    }

    #[test]
    fn hinge_inactive_region_is_exactly_zero(
        cos in -1.0f64..0.05,
        margin in 0.05f64..0.9,
    ) {
        // d = 1 - cos >= 0.95 > margin, so the y=0 hinge is off.
        let a = [1.0, 0.0];
        let b = [cos, (1.0 - cos * cos).max(0.0).sqrt()];
        let d = cosine_distance(&a, &b).unwrap();
        prop_assume!(d >= margin);
        prop_assert_eq!(contrastive_loss(&a, &b, false, margin).unwrap(), 0.0);
    }

    #[test]
    fn encoded_embeddings_are_unit_norm(
        seed in 0u64..500,
        t in 1usize..6,
        bi in any::<bool>(),
    ) {
        let model = RaeModel::init(
            ModelConfig {
                feature_dim: 3,
                hidden_units: 4,
                num_layers: 2,
                embedding_dim: 3,
                bidirectional: bi,
                reverse_decode: false,
            },
            seed,
        )
        .unwrap();
        let mut r = rng::rng_from_seed(seed + 10_000);
        let mut frames = Mat::zeros(t, 3);
        for row in 0..t {
            for col in 0..3 {
                frames.set(row, col, rng::gaussian(&mut r) * 2.0);
            }
        }
        let z = model.encode(&frames).unwrap();
        let norm: f64 = z.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((norm - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn normalizer_round_trip_recovers_input(
        rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 4), 2..20),
    ) {
        let seg = SegmentFeatures {
            frames: Mat::from_rows(&rows),
            label: "x".into(),
            segment_id: "s".into(),
            speaker_id: "v".into(),
        };
        let norm = fit_normalizer(std::slice::from_ref(&seg)).unwrap();
        let z = siamrae_core::features::apply_normalizer(&norm, &seg).unwrap();
        for (t, row) in z.frames.iter_rows().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let back = v * norm.std[j] + norm.mean[j];
                prop_assert!((back - seg.frames.at(t, j)).abs() < 1e-10);
            }
        }
    }
}

/// Exhaustively verify that ranking all positives last minimizes AP over
/// every label arrangement, for all list lengths up to 8.
#[test]
fn positives_last_is_the_minimum_ap_arrangement() {
    for n in 1..=8usize {
        for p in 1..=n {
            let scores: Vec<f64> = (0..n).map(|i| (n - i) as f64).collect(); // strictly desc
            let mut min_ap = f64::INFINITY;
            for mask in 0u32..(1 << n) {
                if mask.count_ones() as usize != p {
                    continue;
                }
                let scored: Vec<(f64, bool)> = (0..n)
                    .map(|i| (scores[i], mask & (1 << i) != 0))
                    .collect();
                let ap = average_precision(&to_pairs(&scored)).unwrap();
                min_ap = min_ap.min(ap);
            }
            let worst: Vec<(f64, bool)> = (0..n).map(|i| (scores[i], i >= n - p)).collect();
            let ap_last = average_precision(&to_pairs(&worst)).unwrap();
            assert!(
                (ap_last - min_ap).abs() < 1e-12,
                "n={n} p={p}: positives-last {ap_last} vs min {min_ap}"
            );
        }
    }
}

fn tiny_detection_setup() -> (RaeModel, Vec<SegmentFeatures>) {
    let model = RaeModel::init(
        ModelConfig {
            feature_dim: 4,
            hidden_units: 5,
            num_layers: 1,
            embedding_dim: 3,
            bidirectional: false,
            reverse_decode: false,
        },
        77,
    )
    .unwrap();
    let corpus = synth_corpus(&SynthConfig {
        n_classes: 2,
        segments_per_class: 10,
        feature_dim: 4,
        length_range: (3, 7),
        class_separation: 1.5,
        noise_std: 0.3,
        seed: 21,
    })
    .unwrap();
    (model, corpus)
}

#[test]
fn detection_score_bounded_and_permutation_invariant() {
    let (model, corpus) = tiny_detection_setup();
    let refs = &corpus[..8];
    let test = &corpus[8];
    let pool = ReferencePool::build(&model, refs).unwrap();
    let score = score_segment(&model, test, &pool, "c0").unwrap().score;
    assert!((-1.0..=1.0).contains(&score));

    let mut shuffled = refs.to_vec();
    shuffled.reverse();
    let pool2 = ReferencePool::build(&model, &shuffled).unwrap();
    let score2 = score_segment(&model, test, &pool2, "c0").unwrap().score;
    assert!((score - score2).abs() < 1e-15);
}

#[test]
fn adding_a_self_reference_never_decreases_the_score() {
    let (model, corpus) = tiny_detection_setup();
    let refs = &corpus[..6];
    let test = corpus[7].clone();
    let pool = ReferencePool::build(&model, refs).unwrap();
    let base = score_segment(&model, &test, &pool, "c0").unwrap().score;

    let mut with_self = refs.to_vec();
    let mut dup = test.clone();
    dup.segment_id = "self_copy".into();
    with_self.push(dup);
    let pool2 = ReferencePool::build(&model, &with_self).unwrap();
    let boosted = score_segment(&model, &test, &pool2, "c0").unwrap().score;
    assert!(boosted >= base - 1e-15, "{boosted} < {base}");
}

#[test]
fn classify_is_monotone_in_the_threshold() {
    let (model, corpus) = tiny_detection_setup();
    let pool = ReferencePool::build(&model, &corpus[..10]).unwrap();
    let result = score_segment(&model, &corpus[10], &pool, "c0").unwrap();
    let mut previous_typical = true;
    for i in 0..=1000 {
        let tau = -1.0 + 2.0 * i as f64 / 1000.0;
        let decided = classify(result.clone(), tau).unwrap();
        let typical = decided.decision == Some(Decision::Typical);
        // Raising tau can only flip typical -> disordered, never back.
        if !previous_typical {
            assert!(!typical, "decision flipped back at tau {tau}");
        }
        previous_typical = typical;
    }
}

#[test]
fn pool_caching_is_transparent() {
    let (model, corpus) = tiny_detection_setup();
    let refs = &corpus[..8];
    let test = &corpus[9];
    let pool = ReferencePool::build(&model, refs).unwrap();
    let through_pool = score_segment(&model, test, &pool, "c0").unwrap();

    // One-shot: embed everything on the fly.
    let z = model.encode(&test.frames).unwrap();
    let mut sum = 0.0;
    let mut n = 0;
    for r in refs.iter().filter(|r| r.label == "c0") {
        let rz = model.encode(&r.frames).unwrap();
        sum += siamrae_core::siamese::cosine_similarity(z.values(), rz.values()).unwrap();
        n += 1;
    }
    assert_eq!(through_pool.score, sum / n as f64);
}
