//! Finite-difference validation of every analytic gradient path on a tiny
//! model: plain and correspondence reconstruction, the contrastive and
//! triplet losses alone, and both combined objectives, for unidirectional
//! and bidirectional encoders.
//!
//! Central differences with eps = 1e-4 in f64. A gradient passes if the
//! relative error `|a - fd| / max(|a| + |fd|, 1e-8)` is at most 1e-3 or the
//! absolute difference is below 1e-8 (floor for parameters whose true
//! gradient is zero, where the relative measure is meaningless).

use siamrae_core::rae::{
    reconstruction_objective, Gradients, ModelConfig, RaeModel,
};
use siamrae_core::rng;
use siamrae_core::siamese::{contrastive_pair_objective, triplet_objective};
use siamrae_core::Mat;

const EPS: f64 = 1e-4;
const REL_TOL: f64 = 1e-3;
const ABS_TOL: f64 = 1e-8;

fn tiny_cfg(bidirectional: bool) -> ModelConfig {
    ModelConfig {
        feature_dim: 3,
        hidden_units: 4,
        num_layers: 1,
        embedding_dim: 2,
        bidirectional,
        reverse_decode: false,
    }
}

fn random_frames(t: usize, f: usize, seed: u64) -> Mat {
    let mut r = rng::rng_from_seed(seed);
    let mut m = Mat::zeros(t, f);
    for row in 0..t {
        for col in 0..f {
            m.set(row, col, rng::gaussian(&mut r));
        }
    }
    m
}

/// Check the analytic gradient of `loss` against central differences for
/// every parameter. Returns the worst relative error among entries that did
/// not pass via the absolute floor.
fn check_gradients(
    model: &RaeModel,
    loss: impl Fn(&RaeModel) -> f64,
    analytic: &Gradients,
    label: &str,
) -> f64 {
    let cfg = model.config().clone();
    let base = model.params().to_vec();
    let mut worst = 0.0f64;
    for i in 0..base.len() {
        let mut plus = base.clone();
        plus[i] += EPS;
        let mut minus = base.clone();
        minus[i] -= EPS;
        let lp = loss(&RaeModel::from_params(cfg.clone(), plus).unwrap());
        let lm = loss(&RaeModel::from_params(cfg.clone(), minus).unwrap());
        let fd = (lp - lm) / (2.0 * EPS);
        let a = analytic.as_slice()[i];
        let abs_err = (a - fd).abs();
        if abs_err <= ABS_TOL {
            continue;
        }
        let rel = abs_err / (a.abs() + fd.abs()).max(ABS_TOL);
        assert!(
            rel <= REL_TOL,
            "{label}: param {i}: analytic {a:.10e} vs fd {fd:.10e} (rel {rel:.3e})"
        );
        worst = worst.max(rel);
    }
    worst
}

#[test]
fn reconstruction_loss_gradients() {
    for (bi, seed) in [(false, 1u64), (true, 2)] {
        let model = RaeModel::init(tiny_cfg(bi), seed).unwrap();
        let s = random_frames(3, 3, 100 + seed);
        let mut grads = Gradients::zeros_like(&model);
        reconstruction_objective(&model, &s, None, Some(&mut grads)).unwrap();
        let worst = check_gradients(
            &model,
            |m| reconstruction_objective(m, &s, None, None).unwrap(),
            &grads,
            if bi { "recon(bi)" } else { "recon(uni)" },
        );
        assert!(worst <= REL_TOL);
    }
}

#[test]
fn correspondence_loss_gradients() {
    for (bi, seed) in [(false, 3u64), (true, 4)] {
        let model = RaeModel::init(tiny_cfg(bi), seed).unwrap();
        let s1 = random_frames(3, 3, 200 + seed);
        let s2 = random_frames(2, 3, 300 + seed); // different length target
        let mut grads = Gradients::zeros_like(&model);
        reconstruction_objective(&model, &s1, Some(&s2), Some(&mut grads)).unwrap();
        check_gradients(
            &model,
            |m| reconstruction_objective(m, &s1, Some(&s2), None).unwrap(),
            &grads,
            "correspondence",
        );
    }
}

#[test]
fn contrastive_loss_gradients_same_and_different() {
    // Pure contrastive term at w = 0, both label branches with the hinge
    // active; margin slack is far above the FD step.
    for (bi, same, margin, seed) in [
        (false, true, 0.9, 5u64),
        (false, false, 1.9, 6),
        (true, true, 0.9, 7),
        (true, false, 1.9, 8),
    ] {
        let model = RaeModel::init(tiny_cfg(bi), seed).unwrap();
        let s1 = random_frames(3, 3, 400 + seed);
        let s2 = random_frames(3, 3, 500 + seed);
        let mut grads = Gradients::zeros_like(&model);
        contrastive_pair_objective(&model, &s1, &s2, same, margin, 0.0, false, Some(&mut grads))
            .unwrap();
        check_gradients(
            &model,
            |m| {
                contrastive_pair_objective(m, &s1, &s2, same, margin, 0.0, false, None)
                    .unwrap()
                    .total
            },
            &grads,
            "contrastive",
        );
    }
}

#[test]
fn triplet_loss_gradients() {
    // Margin large enough that the hinge stays active across the FD step.
    for (bi, seed) in [(false, 9u64), (true, 10)] {
        let model = RaeModel::init(tiny_cfg(bi), seed).unwrap();
        let s_a = random_frames(3, 3, 600 + seed);
        let s_p = random_frames(3, 3, 700 + seed);
        let s_n = random_frames(2, 3, 800 + seed);
        let mut grads = Gradients::zeros_like(&model);
        triplet_objective(&model, &s_a, &s_p, &s_n, 1.5, 0.0, false, Some(&mut grads)).unwrap();
        check_gradients(
            &model,
            |m| {
                triplet_objective(m, &s_a, &s_p, &s_n, 1.5, 0.0, false, None)
                    .unwrap()
                    .total
            },
            &grads,
            "triplet",
        );
    }
}

#[test]
fn combined_contrastive_gradients() {
    for (bi, correspondence, seed) in [(false, false, 11u64), (true, false, 12), (false, true, 13)] {
        let model = RaeModel::init(tiny_cfg(bi), seed).unwrap();
        let s1 = random_frames(3, 3, 900 + seed);
        let s2 = random_frames(2, 3, 1000 + seed);
        let mut grads = Gradients::zeros_like(&model);
        contrastive_pair_objective(
            &model,
            &s1,
            &s2,
            true,
            0.9,
            0.5,
            correspondence,
            Some(&mut grads),
        )
        .unwrap();
        check_gradients(
            &model,
            |m| {
                contrastive_pair_objective(m, &s1, &s2, true, 0.9, 0.5, correspondence, None)
                    .unwrap()
                    .total
            },
            &grads,
            "combined contrastive",
        );
    }
}

#[test]
fn combined_triplet_gradients() {
    for (bi, correspondence, seed) in [(false, false, 14u64), (true, false, 15), (false, true, 16)] {
        let model = RaeModel::init(tiny_cfg(bi), seed).unwrap();
        let s_a = random_frames(3, 3, 1100 + seed);
        let s_p = random_frames(2, 3, 1200 + seed);
        let s_n = random_frames(3, 3, 1300 + seed);
        let mut grads = Gradients::zeros_like(&model);
        triplet_objective(&model, &s_a, &s_p, &s_n, 1.5, 0.5, correspondence, Some(&mut grads))
            .unwrap();
        check_gradients(
            &model,
            |m| {
                triplet_objective(m, &s_a, &s_p, &s_n, 1.5, 0.5, correspondence, None)
                    .unwrap()
                    .total
            },
            &grads,
            "combined triplet",
        );
    }
}

#[test]
fn inactive_hinge_gradients_are_exactly_zero() {
    let model = RaeModel::init(tiny_cfg(false), 17).unwrap();
    let s1 = random_frames(3, 3, 1400);
    let s2 = random_frames(3, 3, 1500);
    // Tiny margin: a different-class pair with d >= m has zero loss and must
    // produce bit-zero gradients through the Siamese term.
    let mut grads = Gradients::zeros_like(&model);
    let parts =
        contrastive_pair_objective(&model, &s1, &s2, false, 1e-9, 0.0, false, Some(&mut grads))
            .unwrap();
    assert_eq!(parts.total, 0.0);
    assert!(grads.as_slice().iter().all(|&g| g == 0.0));
}

#[test]
fn l2_normalization_jacobian_matches_finite_difference() {
    // f(v) = a . (v / ||v||); analytic grad is (I - zzT) a / ||v||.
    let mut r = rng::rng_from_seed(18);
    let v: Vec<f64> = (0..5).map(|_| rng::gaussian(&mut r)).collect();
    let a: Vec<f64> = (0..5).map(|_| rng::gaussian(&mut r)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let z: Vec<f64> = v.iter().map(|x| x / norm).collect();
    let zdota: f64 = z.iter().zip(&a).map(|(x, y)| x * y).sum();
    let analytic: Vec<f64> = (0..5).map(|i| (a[i] - z[i] * zdota) / norm).collect();

    let f = |v: &[f64]| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().zip(&a).map(|(x, y)| x / n * y).sum::<f64>()
    };
    let eps = 1e-6;
    for i in 0..5 {
        let mut plus = v.clone();
        plus[i] += eps;
        let mut minus = v.clone();
        minus[i] -= eps;
        let fd = (f(&plus) - f(&minus)) / (2.0 * eps);
        let rel = (analytic[i] - fd).abs() / (analytic[i].abs() + fd.abs()).max(1e-12);
        assert!(rel <= 1e-6, "component {i}: {} vs {fd}", analytic[i]);
    }
}

#[test]
fn branch_gradients_accumulate_over_the_shared_store() {
    // Two branches into one buffer equals the sum of per-branch runs:
    // parameter sharing is a property of the single flat store.
    let model = RaeModel::init(tiny_cfg(false), 19).unwrap();
    let s1 = random_frames(3, 3, 1600);
    let s2 = random_frames(2, 3, 1700);

    let mut joint = Gradients::zeros_like(&model);
    reconstruction_objective(&model, &s1, None, Some(&mut joint)).unwrap();
    reconstruction_objective(&model, &s2, None, Some(&mut joint)).unwrap();

    let mut lhs = Gradients::zeros_like(&model);
    reconstruction_objective(&model, &s1, None, Some(&mut lhs)).unwrap();
    let mut rhs = Gradients::zeros_like(&model);
    reconstruction_objective(&model, &s2, None, Some(&mut rhs)).unwrap();

    for ((j, l), r) in joint
        .as_slice()
        .iter()
        .zip(lhs.as_slice())
        .zip(rhs.as_slice())
    {
        // Summation order differs between the joint and split runs, so allow
        // last-ulp slack.
        let sum = l + r;
        assert!((j - sum).abs() <= 1e-12 * (1.0 + sum.abs()), "{j} vs {sum}");
    }
}
