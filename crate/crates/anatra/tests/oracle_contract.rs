//! Contract tests for the synthetic noisy oracles: additive noise stays
//! within its declared family (bounded or gaussian at the stated level),
//! streams are seed-reproducible and serially uncorrelated, and the
//! underlying objectives hit their closed-form landmarks exactly.

mod common;

use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;

use anatra::{noisy_quadratic, noisy_rosenbrock, NoiseSpec, ZerothOrderOracle};
use common::{lag1_autocorrelation, rng};

/// Collects `count` noise residuals (noisy minus true value) at a fixed
/// probe point.
fn residuals<O: ZerothOrderOracle>(oracle: &mut O, point: &DVector<f64>, count: usize) -> Vec<f64> {
    let truth = oracle.true_value(point).expect("synthetic oracles know their objective");
    (0..count)
        .map(|_| oracle.evaluate(point).expect("synthetic oracles cannot fail").value - truth)
        .collect()
}

#[test]
fn uniform_noise_respects_its_bound_on_every_draw() {
    let mut points = rng(6100);
    for (i, level) in [1e-3, 1e-1, 1.0].into_iter().enumerate() {
        let mut oracle = noisy_quadratic(3, NoiseSpec::uniform(level), 6100 + i as u64);
        for _ in 0..1000 {
            let point = DVector::from_fn(3, |_, _| points.random_range(-2.0..2.0));
            let truth = oracle.true_value(&point).expect("quadratic true value");
            let eval = oracle.evaluate(&point).expect("evaluation succeeds");
            assert!(
                (eval.value - truth).abs() <= level,
                "uniform residual {} escaped the bound {level}",
                eval.value - truth
            );
            assert_eq!(eval.noise_scale, Some(level), "the oracle must declare its level");
        }
    }
}

#[test]
fn equal_seeds_replay_and_fresh_seeds_diverge() {
    let mut points = rng(6200);
    let sequence: Vec<DVector<f64>> =
        (0..20).map(|_| DVector::from_fn(2, |_, _| points.random_range(-1.0..1.0))).collect();

    let values = |seed: u64| -> Vec<f64> {
        let mut oracle = noisy_quadratic(2, NoiseSpec::gaussian(0.5), seed);
        sequence.iter().map(|p| oracle.evaluate(p).expect("evaluation succeeds").value).collect()
    };
    assert_eq!(values(3), values(3), "one seed must reproduce the exact value sequence");
    assert_ne!(values(3), values(4), "distinct seeds must give distinct noise streams");
}

#[test]
fn noise_streams_are_serially_uncorrelated() {
    let probe = DVector::from_vec(vec![0.7, -0.3]);
    for (name, spec) in
        [("uniform", NoiseSpec::uniform(1e-1)), ("gaussian", NoiseSpec::gaussian(1e-1))]
    {
        let mut oracle = noisy_quadratic(2, spec, 6300);
        let draws = residuals(&mut oracle, &probe, 10_000);
        let rho = lag1_autocorrelation(&draws);
        assert!(rho.abs() < 0.05, "{name} noise lag-1 autocorrelation {rho} is not white");
    }
}

#[test]
fn uniform_residual_variance_matches_the_level() {
    let level = 0.3;
    let probe = DVector::from_vec(vec![0.2, 0.4]);
    let mut oracle = noisy_quadratic(2, NoiseSpec::uniform(level), 6400);
    let draws = residuals(&mut oracle, &probe, 10_000);
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let variance =
        draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (draws.len() - 1) as f64;
    let expected = level * level / 3.0;
    assert!(
        (variance - expected).abs() <= 0.1 * expected,
        "uniform variance {variance} is not within 10% of {expected}"
    );
}

#[test]
fn gaussian_residual_spread_matches_its_level() {
    let probe = DVector::from_vec(vec![-0.5, 0.1]);
    let mut oracle = noisy_quadratic(2, NoiseSpec::gaussian(0.1), 6500);
    let draws = residuals(&mut oracle, &probe, 10_000);
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let std = (draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
        / (draws.len() - 1) as f64)
        .sqrt();
    assert!(
        (0.095..=0.105).contains(&std),
        "gaussian sample deviation {std} strayed from the 0.1 level"
    );
}

#[test]
fn objective_landmarks_are_exact() {
    let mut quadratic = noisy_quadratic(3, NoiseSpec::uniform(0.0), 1);
    let point = DVector::from_vec(vec![1.0, 2.0, 3.0]);
    assert_eq!(quadratic.true_value(&point), Some(14.0));
    assert_eq!(quadratic.evaluate(&point).expect("evaluation succeeds").value, 14.0);
    assert_eq!(quadratic.dimension(), 3);

    let mut rosenbrock = noisy_rosenbrock(NoiseSpec::gaussian(0.0), 1);
    let minimum = DVector::from_vec(vec![1.0, 1.0]);
    assert_eq!(rosenbrock.true_value(&minimum), Some(0.0));
    assert_eq!(rosenbrock.evaluate(&minimum).expect("evaluation succeeds").value, 0.0);
    let origin = DVector::zeros(2);
    assert_eq!(rosenbrock.true_value(&origin), Some(1.0));
    assert_eq!(rosenbrock.dimension(), 2);

    // A zero noise level draws nothing from the stream, so every later
    // evaluation stays exact as well.
    for _ in 0..50 {
        assert_eq!(quadratic.evaluate(&point).expect("evaluation succeeds").value, 14.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn uniform_noise_stays_within_any_level(
        seed in 0u64..(1 << 48),
        level in 0.0f64..2.0,
        coords in prop::collection::vec(-3.0f64..3.0, 1..5),
    ) {
        let d = coords.len();
        let mut oracle = noisy_quadratic(d, NoiseSpec::uniform(level), seed);
        let point = DVector::from_vec(coords);
        let truth = oracle.true_value(&point).expect("quadratic true value");
        for _ in 0..50 {
            let eval = oracle.evaluate(&point).expect("evaluation succeeds");
            prop_assert!((eval.value - truth).abs() <= level);
            prop_assert_eq!(eval.noise_scale, Some(level));
        }
    }
}
