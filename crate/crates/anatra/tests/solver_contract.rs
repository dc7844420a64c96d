//! Contract tests for the trust-region solver loop: every run trace must
//! satisfy the bookkeeping invariants (consecutive indices, budget
//! accounting, the sampling-radius noise floor, shrink/expand rules, skip
//! semantics, the best-point safeguard), the deterministic baseline must be
//! bit-identical to the solver with a zero noise estimate, and traces must
//! survive JSONL round trips unchanged.

mod common;

use nalgebra::DVector;
use proptest::prelude::*;

use anatra::{
    deterministic_mbtr_solve, noisy_quadratic, noisy_rosenbrock, shot_oracle, solve, Error,
    EvalEvent, Graph, NoiseEstimateMode, NoiseSpec, NoisyEvaluation, OracleError, QaoaCircuit,
    RunTrace, SkipReason, SolverConfig, ZerothOrderOracle,
};

/// Asserts every per-record invariant a run trace must satisfy under the
/// given configuration. Radius updates and the sampling floor are recomputed
/// from the recorded fields with the solver's own expressions, so those
/// comparisons are exact rather than approximate.
fn check_trace(trace: &RunTrace, config: &SolverConfig, d: usize) {
    assert!(!trace.evaluations.is_empty(), "a run always evaluates its starting point");
    assert!(
        trace.evaluations.len() <= config.budget,
        "{} evaluations exceed the budget {}",
        trace.evaluations.len(),
        config.budget
    );
    for (i, eval) in trace.evaluations.iter().enumerate() {
        assert_eq!(eval.eval_index, i + 1, "evaluation indices must be 1-based and consecutive");
        assert_eq!(eval.point.len(), d, "evaluation point dimension mismatch");
        assert!(eval.noisy_value.is_finite());
    }
    let centers: Vec<_> =
        trace.evaluations.iter().filter(|e| e.event == EvalEvent::Center).collect();
    assert_eq!(centers.len(), 1, "only the starting point is ever charged as a center");
    assert_eq!(centers[0].eval_index, 1);
    assert_eq!(centers[0].iteration, 0);

    let mut next_eval = 0;
    let mut running_best = f64::INFINITY;
    let mut seen_values: Vec<f64> = Vec::new();
    for (i, rec) in trace.iterations.iter().enumerate() {
        assert_eq!(rec.k, i, "iteration records must be consecutive from zero");

        // Charge this iteration's evaluations and check their order: an
        // optional center first, geometry next, at most one trial last.
        let mut count = 0;
        let mut trials = 0;
        while next_eval < trace.evaluations.len()
            && trace.evaluations[next_eval].iteration == rec.k
        {
            let eval = &trace.evaluations[next_eval];
            match eval.event {
                EvalEvent::Center => assert_eq!(count, 0, "a center record must come first"),
                EvalEvent::Geometry => {
                    assert_eq!(trials, 0, "geometry evaluations must precede the trial")
                }
                EvalEvent::Trial => trials += 1,
            }
            running_best = running_best.min(eval.noisy_value);
            seen_values.push(eval.noisy_value);
            count += 1;
            next_eval += 1;
        }
        assert!(trials <= 1, "an iteration evaluates at most one trial point");
        assert_eq!(rec.eval_count, count, "iteration {i} miscounts its evaluations");
        assert_eq!(rec.best_value, running_best, "best-value memory diverged at iteration {i}");

        // Radii: chained between records, capped, and the sampling radius
        // reproduces the solver's noise floor exactly.
        if i == 0 {
            assert_eq!(rec.delta_before, config.delta0);
        } else {
            assert_eq!(rec.delta_before, trace.iterations[i - 1].delta_after);
        }
        assert!(rec.delta_after > 0.0 && rec.delta_after <= config.delta_max);
        assert_eq!(
            rec.sampling_radius,
            rec.delta_before.max((config.r * rec.noise_estimate / rec.lipschitz_estimate).sqrt()),
            "sampling radius must equal the trust radius floored by the noise scale"
        );

        // Noise and curvature estimates.
        match config.noise_mode {
            NoiseEstimateMode::Exact(level) => assert_eq!(rec.noise_estimate, level),
            NoiseEstimateMode::StandardError => assert!(rec.noise_estimate >= 0.0),
        }
        assert!(rec.lipschitz_estimate >= 1e-8);
        assert!(rec.lipschitz_estimate >= config.r * rec.noise_estimate);

        // Geometry certification is reported against the configured bar.
        assert!(rec.lambda >= 1.0 - 1e-9, "poisedness is at least one, got {}", rec.lambda);
        assert_eq!(rec.validity, rec.lambda <= config.lambda_bar);

        // Model fields: absent only when the budget died during geometry.
        match rec.gnorm {
            None => {
                assert!(rec.snorm.is_none());
                assert_eq!(rec.skip_reason, Some(SkipReason::BudgetExhausted));
            }
            Some(gnorm) => {
                assert!(gnorm >= 0.0);
                let snorm = rec.snorm.expect("a solved subproblem reports its step length");
                assert!(snorm <= rec.delta_before * (1.0 + 1e-10), "step left the trust region");
            }
        }

        // The center values must be noisy values of previously charged
        // evaluations (caching reuses the first recorded value forever).
        assert!(
            seen_values.iter().any(|&v| v == rec.center_value),
            "iteration {i} center value was never evaluated"
        );
        assert!(
            seen_values.iter().any(|&v| v == rec.next_center_value),
            "iteration {i} next-center value was never evaluated"
        );

        match rec.skip_reason {
            Some(SkipReason::SmallStepNotValid) => {
                assert!(rec.rho.is_none());
                assert!(!rec.accepted);
                assert!(!rec.validity, "the skip rule only fires on uncertified geometry");
                assert_eq!(rec.delta_after, rec.delta_before);
                assert_eq!(rec.next_center_value, rec.center_value);
                let snorm = rec.snorm.expect("the skip rule inspects the solved step");
                assert!(snorm < config.skip_step_fraction * rec.delta_before);
            }
            Some(SkipReason::BudgetExhausted) => {
                assert!(rec.rho.is_none());
                assert!(!rec.accepted);
                assert_eq!(rec.delta_after, rec.delta_before);
                assert_eq!(rec.next_center_value, rec.center_value);
                assert_eq!(i, trace.iterations.len() - 1, "exhaustion ends the run");
                assert_eq!(trace.evaluations.len(), config.budget);
            }
            Some(SkipReason::DegeneratePrediction) => {
                assert!(rec.rho.is_none());
                assert!(!rec.accepted);
                if rec.validity {
                    assert_eq!(rec.delta_after, config.gamma * rec.delta_before);
                } else {
                    assert_eq!(rec.delta_after, rec.delta_before);
                }
            }
            None => {
                let rho = rec.rho.expect("a ranked iteration records its ratio");
                assert!(rho.is_finite());
                assert_eq!(rec.accepted, rho >= config.eta1);
                let snorm = rec.snorm.expect("a ranked iteration solved the subproblem");
                if rec.accepted {
                    if snorm > config.expand_step_fraction * rec.delta_before {
                        assert_eq!(
                            rec.delta_after,
                            (rec.delta_before / config.gamma).min(config.delta_max)
                        );
                    } else {
                        assert_eq!(rec.delta_after, rec.delta_before);
                    }
                } else if rec.validity {
                    assert_eq!(rec.delta_after, config.gamma * rec.delta_before);
                } else {
                    assert_eq!(rec.delta_after, rec.delta_before);
                }
            }
        }

        // The safeguard runs on every iteration that ranked or evaluated a
        // trial: the outgoing center either is the best point or sits within
        // the noise allowance of it.
        if matches!(rec.skip_reason, None | Some(SkipReason::DegeneratePrediction)) {
            assert!(
                rec.next_center_value == rec.best_value
                    || rec.next_center_value < rec.best_value + config.r * rec.noise_estimate,
                "iteration {i} left a center drifted above the safeguard"
            );
        }
    }
    assert_eq!(
        next_eval,
        trace.evaluations.len(),
        "every evaluation must be charged to a recorded iteration"
    );
}

/// Runs the solver, checks the full trace contract, and verifies that the
/// returned point and value are the first evaluation attaining the lowest
/// noisy value.
fn run_and_check<O: ZerothOrderOracle>(
    oracle: &mut O,
    theta0: &DVector<f64>,
    config: &SolverConfig,
) -> RunTrace {
    let (best, value, trace) = solve(oracle, theta0, config).expect("solve must succeed");
    check_trace(&trace, config, theta0.len());
    let minimum = trace.evaluations.iter().map(|e| e.noisy_value).fold(f64::INFINITY, f64::min);
    assert_eq!(value, minimum, "returned value must be the lowest noisy value seen");
    let first = trace
        .evaluations
        .iter()
        .find(|e| e.noisy_value == minimum)
        .expect("a nonempty trace attains its minimum");
    assert_eq!(
        best.iter().copied().collect::<Vec<f64>>(),
        first.point,
        "returned point must be the first to attain the best value"
    );
    trace
}

#[test]
fn trace_invariants_hold_across_the_problem_grid() {
    let mut runs = 0;
    for d in [2usize, 3] {
        let theta0 = DVector::from_element(d, 1.0);
        for level in [0.0, 1e-3, 1e-1] {
            for spec in [NoiseSpec::uniform(level), NoiseSpec::gaussian(level)] {
                let mut config = SolverConfig::for_dimension(d);
                config.budget = 75;
                config.noise_mode = NoiseEstimateMode::Exact(level);
                let mut oracle = noisy_quadratic(d, spec, 9000 + runs);
                run_and_check(&mut oracle, &theta0, &config);
                runs += 1;
            }
        }
    }
    assert_eq!(runs, 12);

    let mut config = SolverConfig::for_dimension(2);
    config.budget = 100;
    config.noise_mode = NoiseEstimateMode::Exact(1e-1);
    let mut oracle = noisy_rosenbrock(NoiseSpec::uniform(1e-1), 9100);
    run_and_check(&mut oracle, &DVector::zeros(2), &config);

    let mut config = SolverConfig::for_dimension(2);
    config.budget = 75;
    config.noise_mode = NoiseEstimateMode::StandardError;
    let mut oracle = noisy_quadratic(2, NoiseSpec::gaussian(1e-2), 9200);
    run_and_check(&mut oracle, &DVector::from_element(2, 1.0), &config);

    let circuit = QaoaCircuit::new(Graph::cycle(6), 1);
    let mut oracle = shot_oracle(circuit, 100, 9300).expect("valid shot count");
    let mut config = SolverConfig::for_dimension(2);
    config.budget = 60;
    config.noise_mode = NoiseEstimateMode::StandardError;
    run_and_check(&mut oracle, &DVector::from_vec(vec![0.4, 0.7]), &config);
}

#[test]
fn noisy_runs_spend_the_whole_budget() {
    let theta0 = DVector::from_element(2, 1.0);
    for budget in [4usize, 20, 75] {
        let mut config = SolverConfig::for_dimension(2);
        config.budget = budget;
        config.noise_mode = NoiseEstimateMode::Exact(1e-1);
        let mut oracle = noisy_quadratic(2, NoiseSpec::gaussian(1e-1), 9400 + budget as u64);
        let trace = run_and_check(&mut oracle, &theta0, &config);
        assert_eq!(
            trace.evaluations.len(),
            budget,
            "gaussian noise keeps trial points fresh, so the budget must be spent"
        );
    }
}

#[test]
fn a_budget_below_the_first_model_is_rejected() {
    let mut config = SolverConfig::for_dimension(2);
    config.budget = 3;
    let mut oracle = noisy_quadratic(2, NoiseSpec::uniform(0.0), 1);
    let result = solve(&mut oracle, &DVector::from_element(2, 1.0), &config);
    match result {
        Err(Error::BudgetTooSmall { budget, required }) => {
            assert_eq!(budget, 3);
            assert_eq!(required, 4);
        }
        other => panic!("expected BudgetTooSmall, got {other:?}"),
    }
}

/// An oracle that cannot characterize its own noise.
struct SilentOracle;

impl ZerothOrderOracle for SilentOracle {
    fn dimension(&self) -> usize {
        2
    }

    fn evaluate(&mut self, theta: &DVector<f64>) -> Result<NoisyEvaluation, OracleError> {
        Ok(NoisyEvaluation { value: theta.dot(theta), noise_scale: None })
    }
}

#[test]
fn standard_error_mode_requires_a_noise_scale() {
    let mut config = SolverConfig::for_dimension(2);
    config.noise_mode = NoiseEstimateMode::StandardError;
    let result = solve(&mut SilentOracle, &DVector::from_element(2, 1.0), &config);
    assert!(
        matches!(result, Err(Error::MissingNoiseInfo)),
        "an oracle without a noise scale cannot serve standard-error mode"
    );
}

#[test]
fn deterministic_baseline_is_bitwise_the_zero_noise_solver() {
    let theta0 = DVector::from_vec(vec![1.0, 1.0]);
    let mut config = SolverConfig::for_dimension(2);
    config.budget = 60;
    config.noise_mode = NoiseEstimateMode::StandardError;

    let mut first = noisy_quadratic(2, NoiseSpec::gaussian(1e-2), 77);
    let (baseline_point, baseline_value, baseline) =
        deterministic_mbtr_solve(&mut first, &theta0, &config).expect("baseline run");

    let mut zeroed = config.clone();
    zeroed.noise_mode = NoiseEstimateMode::Exact(0.0);
    let mut second = noisy_quadratic(2, NoiseSpec::gaussian(1e-2), 77);
    let (zero_point, zero_value, zero_trace) =
        solve(&mut second, &theta0, &zeroed).expect("zero-noise run");

    assert_eq!(baseline, zero_trace, "the baseline must replay the zero-noise solver exactly");
    assert_eq!(baseline_point, zero_point);
    assert_eq!(baseline_value, zero_value);

    let mut baseline_bytes = Vec::new();
    baseline.write_jsonl(&mut baseline_bytes).expect("serialize baseline");
    let mut zero_bytes = Vec::new();
    zero_trace.write_jsonl(&mut zero_bytes).expect("serialize zero-noise trace");
    assert_eq!(baseline_bytes, zero_bytes, "serialized traces must match byte for byte");
}

#[test]
fn equal_seeds_replay_and_fresh_seeds_diverge() {
    let theta0 = DVector::from_element(2, 1.0);
    let mut config = SolverConfig::for_dimension(2);
    config.budget = 40;
    config.noise_mode = NoiseEstimateMode::Exact(1e-1);

    let run = |seed: u64| {
        let mut oracle = noisy_quadratic(2, NoiseSpec::gaussian(1e-1), seed);
        solve(&mut oracle, &theta0, &config).expect("solve must succeed")
    };
    let (point_a, value_a, trace_a) = run(11);
    let (point_b, value_b, trace_b) = run(11);
    assert_eq!(trace_a, trace_b, "equal seeds must replay the identical run");
    assert_eq!(point_a, point_b);
    assert_eq!(value_a, value_b);

    let (_, _, trace_c) = run(12);
    assert_ne!(trace_a, trace_c, "a fresh noise stream must change the run");
}

#[test]
fn real_traces_round_trip_through_jsonl_with_stable_fields() {
    let mut config = SolverConfig::for_dimension(2);
    config.budget = 50;
    config.noise_mode = NoiseEstimateMode::Exact(1e-2);
    let mut oracle = noisy_quadratic(2, NoiseSpec::uniform(1e-2), 9500);
    let trace = run_and_check(&mut oracle, &DVector::from_element(2, 1.0), &config);

    let mut bytes = Vec::new();
    trace.write_jsonl(&mut bytes).expect("serialize trace");
    let back = RunTrace::read_jsonl(bytes.as_slice()).expect("parse trace");
    assert_eq!(back, trace, "JSONL round trip must preserve every record");

    let text = String::from_utf8(bytes).expect("traces are UTF-8");
    for line in text.lines() {
        let value: serde_json::Value = serde_json::from_str(line).expect("each line is JSON");
        let object = value.as_object().expect("each line is an object");
        if object.contains_key("eval_index") {
            for key in ["point", "noisy_value", "iteration", "event"] {
                assert!(object.contains_key(key), "evaluation line missing {key}: {line}");
            }
        } else {
            for key in [
                "k",
                "rho",
                "accepted",
                "delta_before",
                "delta_after",
                "gnorm",
                "snorm",
                "lambda",
                "validity",
                "eval_count",
                "sampling_radius",
                "noise_estimate",
                "lipschitz_estimate",
                "center_value",
                "next_center_value",
                "best_value",
            ] {
                assert!(object.contains_key(key), "iteration line missing {key}: {line}");
            }
        }
    }
}

#[test]
fn noiseless_quadratic_run_converges_quickly() {
    let mut config = SolverConfig::for_dimension(2);
    config.budget = 75;
    let mut oracle = noisy_quadratic(2, NoiseSpec::uniform(0.0), 9600);
    let (_, value, trace) = solve(&mut oracle, &DVector::from_element(2, 1.0), &config)
        .expect("solve must succeed");
    check_trace(&trace, &config, 2);
    assert!(value <= 1e-6, "noiseless quadratic should be solved to {value:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_configurations_keep_trace_invariants(
        seed in 0u64..(1 << 48),
        eta1 in 0.05f64..0.9,
        gamma in 0.2f64..0.9,
        level in 0.0f64..0.2,
        budget in 10usize..40,
        delta0 in 0.1f64..2.0,
    ) {
        let mut config = SolverConfig::for_dimension(2);
        config.eta1 = eta1;
        config.gamma = gamma;
        config.budget = budget;
        config.delta0 = delta0;
        config.noise_mode = NoiseEstimateMode::Exact(level);
        let mut oracle = noisy_quadratic(2, NoiseSpec::uniform(level), seed);
        let theta0 = DVector::from_vec(vec![1.5, -0.5]);
        let (_, _, trace) = solve(&mut oracle, &theta0, &config).expect("solve must succeed");
        check_trace(&trace, &config, 2);
    }
}
