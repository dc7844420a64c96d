//! Noise-aware model-based trust-region solver.
//!
//! The loop decouples the trust-region radius used to bound steps from a
//! sampling radius used to place interpolation points: when the noise
//! estimate is large relative to the curvature estimate, points are spread
//! over a wider ball so that function-value differences rise above the noise
//! floor. Acceptance uses a relaxed ratio whose numerator carries an additive
//! noise allowance, geometry work is limited to one improvement sweep per
//! iteration, shrinking requires a certified-valid set, and a best-point
//! memory resets the incumbent whenever its noisy value drifts above the best
//! seen by more than the noise allowance.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::geometry::{affine_points, improve_poisedness};
use crate::model::build_mfn_model;
use crate::oracle::{NoisyEvaluation, ZerothOrderOracle};
use crate::set::InterpolationSet;
use crate::trace::{EvalEvent, EvalRecord, IterationRecord, RunTrace, SkipReason};
use crate::trs::solve_trs;

/// Orthogonal-residual threshold used when rebuilding an affine set from the
/// evaluation history.
const AFFINE_TAU: f64 = 1e-5;

/// Relative floor on the smallest displacement singular value below which the
/// interpolation set is considered rank deficient and rebuilt.
const RANK_TOLERANCE: f64 = 1e-8;

/// How the solver obtains its per-iteration noise estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseEstimateMode {
    /// A known noise scale supplied up front and used every iteration.
    Exact(f64),
    /// Read the per-evaluation standard error the oracle reports at the
    /// current center.
    StandardError,
}

/// Tuning parameters for [`solve`].
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Acceptance threshold on the relaxed ratio.
    pub eta1: f64,
    /// Trust-radius shrink factor; expansion uses its inverse.
    pub gamma: f64,
    /// Sampling-ball factor: points are kept within `c_s` times the sampling
    /// radius of the center.
    pub c_s: f64,
    /// Poisedness threshold certifying the interpolation set as valid.
    pub lambda_bar: f64,
    /// Noise-allowance multiplier used by the relaxed ratio, the sampling
    /// floor, and the best-point safeguard.
    pub r: f64,
    /// Initial trust radius.
    pub delta0: f64,
    /// Upper bound on the trust radius.
    pub delta_max: f64,
    /// Step-length fraction of the trust radius above which an accepted step
    /// triggers expansion.
    pub expand_step_fraction: f64,
    /// Step-length fraction of the trust radius below which an uncertified
    /// iteration skips the trial evaluation.
    pub skip_step_fraction: f64,
    /// Maximum number of oracle evaluations.
    pub budget: usize,
    /// Where the noise estimate comes from.
    pub noise_mode: NoiseEstimateMode,
}

impl SolverConfig {
    /// Standard configuration for a `d`-dimensional problem: thresholds
    /// `eta1 = 0.25` and `gamma = 0.5`, sampling factor and poisedness
    /// threshold `sqrt(d)` (the threshold is raised to `sqrt(2)` when `d = 1`
    /// since it must exceed one), noise multiplier `r = 2`, radii
    /// `delta0 = 1` and `delta_max = 1e3`, budget `25 (d + 1)`, and an exact
    /// noise estimate of zero.
    pub fn for_dimension(d: usize) -> Self {
        assert!(d >= 1, "dimension must be at least 1");
        let root = (d as f64).sqrt();
        SolverConfig {
            eta1: 0.25,
            gamma: 0.5,
            c_s: root.max(1.0),
            lambda_bar: root.max(2.0_f64.sqrt()),
            r: 2.0,
            delta0: 1.0,
            delta_max: 1e3,
            expand_step_fraction: 0.75,
            skip_step_fraction: 0.01,
            budget: 25 * (d + 1),
            noise_mode: NoiseEstimateMode::Exact(0.0),
        }
    }

    /// Checks every invariant against the problem dimension.
    ///
    /// # Errors
    ///
    /// [`Error::InvalidConfig`] when a parameter is out of range and
    /// [`Error::BudgetTooSmall`] when the budget cannot cover the first
    /// model step (`d + 2` evaluations).
    pub fn validate(&self, dimension: usize) -> Result<(), Error> {
        if !(self.eta1 > 0.0 && self.eta1 < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "acceptance threshold eta1 = {} must lie in (0, 1)",
                self.eta1
            )));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "shrink factor gamma = {} must lie in (0, 1)",
                self.gamma
            )));
        }
        if !(self.r >= 2.0 && self.r.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "noise multiplier r = {} must be finite and at least 2",
                self.r
            )));
        }
        if !(self.delta0 > 0.0 && self.delta_max >= self.delta0 && self.delta_max.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "radii must satisfy delta_max >= delta0 > 0, got delta0 = {}, delta_max = {}",
                self.delta0, self.delta_max
            )));
        }
        if !(self.c_s >= 1.0 && self.c_s.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sampling factor c_s = {} must be finite and at least 1",
                self.c_s
            )));
        }
        if !(self.lambda_bar > 1.0 && self.lambda_bar.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "poisedness threshold lambda_bar = {} must be finite and exceed 1",
                self.lambda_bar
            )));
        }
        if !(self.expand_step_fraction > 0.0 && self.expand_step_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "expansion step fraction {} must lie in (0, 1)",
                self.expand_step_fraction
            )));
        }
        if !(self.skip_step_fraction > 0.0 && self.skip_step_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "skip step fraction {} must lie in (0, 1)",
                self.skip_step_fraction
            )));
        }
        if let NoiseEstimateMode::Exact(level) = self.noise_mode {
            if !(level >= 0.0 && level.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "exact noise level {level} must be finite and nonnegative"
                )));
            }
        }
        let required = dimension + 2;
        if self.budget < required {
            return Err(Error::BudgetTooSmall { budget: self.budget, required });
        }
        Ok(())
    }
}

/// The noise estimate in force for the coming iteration.
///
/// Exact mode returns the configured level every iteration; standard-error
/// mode reads the spread the oracle reported at the current center, clamped
/// at zero.
///
/// # Errors
///
/// [`Error::MissingNoiseInfo`] in standard-error mode when the center
/// evaluation carries no noise scale.
pub fn estimate_noise(
    mode: &NoiseEstimateMode,
    center: &NoisyEvaluation,
) -> Result<f64, Error> {
    match mode {
        NoiseEstimateMode::Exact(level) => Ok(*level),
        NoiseEstimateMode::StandardError => {
            let scale = center.noise_scale.ok_or(Error::MissingNoiseInfo)?;
            Ok(scale.max(0.0))
        }
    }
}

/// The gradient-Lipschitz estimate for the coming iteration.
///
/// The first iteration uses one. Afterwards, when the previous iteration's
/// geometry was certified valid, the estimate becomes the largest eigenvalue
/// magnitude of the previous model Hessian (a Lipschitz surrogate must
/// dominate curvature of either sign); otherwise the previous estimate is
/// retained. The result is always floored at `max(1e-8, r * noise)` so the
/// sampling-radius floor stays well defined.
pub fn update_lipschitz(
    previous: Option<f64>,
    previous_model_valid: bool,
    previous_hessian: Option<&DMatrix<f64>>,
    r: f64,
    noise: f64,
) -> f64 {
    let candidate = match previous {
        None => 1.0,
        Some(retained) => match previous_hessian {
            Some(hessian) if previous_model_valid => hessian
                .clone()
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .fold(0.0_f64, |acc, ev| acc.max(ev.abs())),
            _ => retained,
        },
    };
    candidate.max(1e-8).max(r * noise)
}

/// Acceptance ratio with an additive noise allowance in the numerator:
/// `(f_center - f_trial + r * noise) / predicted`. With zero noise this is
/// the classical ratio of achieved to predicted decrease.
///
/// # Errors
///
/// [`Error::DegeneratePrediction`] when the predicted decrease is at most
/// `1e-16 * max(1, |f_center|)`, in which case the ratio would be
/// meaningless and the iteration counts as rejected.
pub fn relaxed_rho(
    f_center: f64,
    f_trial: f64,
    noise: f64,
    r: f64,
    predicted: f64,
) -> Result<f64, Error> {
    if predicted <= 1e-16 * f_center.abs().max(1.0) {
        return Err(Error::DegeneratePrediction { predicted });
    }
    Ok((f_center - f_trial + r * noise) / predicted)
}

/// A completed noisy evaluation pulled from the cache or freshly charged to
/// the budget, or notice that the budget is spent.
enum Evaluated {
    Value(NoisyEvaluation),
    Exhausted,
}

/// Memo of every point the oracle has been asked about, plus running best
/// memory. Reusing a previously evaluated point is free: the cached noisy
/// value is returned without spending budget or appending a record.
struct EvalCache {
    map: HashMap<Vec<u64>, NoisyEvaluation>,
    /// Unique evaluated points in first-evaluation order.
    history: Vec<DVector<f64>>,
    /// Evaluations charged so far.
    used: usize,
    best_point: Option<DVector<f64>>,
    best_value: f64,
}

impl EvalCache {
    fn new() -> Self {
        EvalCache {
            map: HashMap::new(),
            history: Vec::new(),
            used: 0,
            best_point: None,
            best_value: f64::INFINITY,
        }
    }

    fn key(point: &DVector<f64>) -> Vec<u64> {
        point.iter().map(|v| v.to_bits()).collect()
    }

    /// Cached noisy value at a previously evaluated point.
    fn value_at(&self, point: &DVector<f64>) -> f64 {
        self.map
            .get(&Self::key(point))
            .expect("point was evaluated before its value was read")
            .value
    }

    /// Returns the evaluation at `point`, calling the oracle and recording
    /// the result when the point is new and budget remains.
    fn ensure<O: ZerothOrderOracle + ?Sized>(
        &mut self,
        oracle: &mut O,
        point: &DVector<f64>,
        budget: usize,
        iteration: usize,
        event: EvalEvent,
        trace: &mut RunTrace,
    ) -> Result<Evaluated, Error> {
        let key = Self::key(point);
        if let Some(cached) = self.map.get(&key) {
            return Ok(Evaluated::Value(*cached));
        }
        if self.used >= budget {
            return Ok(Evaluated::Exhausted);
        }
        let evaluation = oracle.evaluate(point).map_err(|failure| Error::OracleFailure {
            message: failure.0,
            partial_trace: Box::new(trace.clone()),
        })?;
        self.used += 1;
        trace.evaluations.push(EvalRecord {
            eval_index: self.used,
            point: point.iter().copied().collect(),
            noisy_value: evaluation.value,
            true_value: oracle.true_value(point),
            iteration,
            event,
        });
        self.map.insert(key, evaluation);
        self.history.push(point.clone());
        if evaluation.value < self.best_value {
            self.best_value = evaluation.value;
            self.best_point = Some(point.clone());
        }
        Ok(Evaluated::Value(evaluation))
    }

    /// Evaluated points, most recent first, for affine rebuilds.
    fn recent_history(&self) -> Vec<DVector<f64>> {
        self.history.iter().rev().cloned().collect()
    }
}

/// Runs the noise-aware trust-region loop from `theta0` until the evaluation
/// budget is spent, returning the point with the lowest noisy value, that
/// value, and the full run trace.
///
/// Each iteration estimates the noise scale and a gradient-Lipschitz
/// surrogate, widens the sampling radius to
/// `max(delta, sqrt(r * noise / lipschitz))`, prunes and truncates the
/// interpolation set, rebuilds it from the evaluation history when rank
/// deficient, runs one poisedness-improvement sweep, evaluates missing
/// points, minimizes the interpolation model inside the trust region, and
/// ranks the trial with the relaxed ratio. Trials are skipped (without
/// spending an evaluation) when the set is uncertified and the step is
/// shorter than the skip fraction of the trust radius. The radius expands
/// only on accepted near-full-length steps and shrinks only on rejected
/// iterations whose geometry was certified valid. A best-point safeguard
/// resets the center whenever its noisy value exceeds the best seen plus the
/// noise allowance.
///
/// # Errors
///
/// [`Error::BudgetTooSmall`] or [`Error::InvalidConfig`] when the
/// configuration fails validation, [`Error::MissingNoiseInfo`] in
/// standard-error mode when the oracle reports no spread, and
/// [`Error::OracleFailure`] carrying the partial trace when an evaluation
/// fails.
///
/// # Panics
///
/// Panics when `theta0`'s length differs from the oracle dimension.
pub fn solve<O: ZerothOrderOracle + ?Sized>(
    oracle: &mut O,
    theta0: &DVector<f64>,
    config: &SolverConfig,
) -> Result<(DVector<f64>, f64, RunTrace), Error> {
    let d = oracle.dimension();
    assert_eq!(theta0.len(), d, "starting point dimension must match the oracle");
    config.validate(d)?;

    let max_points = (d + 1) * (d + 2) / 2;
    // Hard cap on outer iterations; reached only when the loop stops
    // spending budget yet keeps changing state, such as an endless chain of
    // valid-geometry shrinks at a cached trial point.
    let iteration_cap = 50 * config.budget + 1000;

    let mut trace = RunTrace::new();
    let mut cache = EvalCache::new();
    let mut set = InterpolationSet::new(theta0.clone());
    let mut theta = theta0.clone();
    let mut delta = config.delta0;
    let mut prev_lipschitz: Option<f64> = None;
    let mut prev_validity = false;
    let mut prev_hessian: Option<DMatrix<f64>> = None;

    for k in 0..iteration_cap {
        if cache.used >= config.budget {
            break;
        }
        let used_before = cache.used;
        let theta_start = theta.clone();

        // (a) Noise and Lipschitz estimates at the current center.
        let center_eval = match cache.ensure(
            oracle,
            &theta,
            config.budget,
            k,
            EvalEvent::Center,
            &mut trace,
        )? {
            Evaluated::Value(evaluation) => evaluation,
            // Unreachable: the center is either the cached starting point of
            // iteration zero (budget >= d + 2 >= 3) or a previously
            // evaluated point.
            Evaluated::Exhausted => break,
        };
        let center_value = center_eval.value;
        let noise = estimate_noise(&config.noise_mode, &center_eval)?;
        let lipschitz =
            update_lipschitz(prev_lipschitz, prev_validity, prev_hessian.as_ref(), config.r, noise);
        prev_lipschitz = Some(lipschitz);

        // (b) Sampling radius with its noise floor.
        let sampling = delta.max((config.r * noise / lipschitz).sqrt());

        // (c) Keep only points within the sampling ball of the center.
        set.prune_outside(config.c_s * sampling);

        // (d) Cap the set at a full quadratic's worth of points.
        set.truncate_oldest(max_points);

        // (e) Rebuild from history when the displacements lose rank.
        let mut rebuilt = false;
        if set.len() <= d
            || set.displacement_min_singular() < RANK_TOLERANCE * config.c_s * sampling
        {
            set = affine_points(&cache.recent_history(), &theta, config.c_s, sampling, AFFINE_TAU);
            rebuilt = true;
        }

        // (f) One poisedness-improvement sweep over the sampling ball.
        let report = match improve_poisedness(set, &theta, sampling, config.lambda_bar, 1) {
            Ok(report) => report,
            Err(Error::SingularGeometry { .. }) => {
                rebuilt = true;
                let fresh = affine_points(
                    &cache.recent_history(),
                    &theta,
                    config.c_s,
                    sampling,
                    AFFINE_TAU,
                );
                improve_poisedness(fresh, &theta, sampling, config.lambda_bar, 1)
                    .expect("an affinely independent rebuild admits Lagrange polynomials")
            }
            Err(other) => return Err(other),
        };
        set = report.set;
        let validity = report.valid;
        let lambda = report.lambda;
        let swapped = !report.swaps.is_empty();

        // (g) Evaluate interpolation points the cache does not yet hold.
        let mut exhausted = false;
        for i in 0..set.len() {
            match cache.ensure(
                oracle,
                set.point(i),
                config.budget,
                k,
                EvalEvent::Geometry,
                &mut trace,
            )? {
                Evaluated::Value(_) => {}
                Evaluated::Exhausted => {
                    exhausted = true;
                    break;
                }
            }
        }
        if exhausted {
            trace.iterations.push(IterationRecord {
                k,
                rho: None,
                accepted: false,
                delta_before: delta,
                delta_after: delta,
                gnorm: None,
                snorm: None,
                lambda,
                validity,
                eval_count: cache.used - used_before,
                skip_reason: Some(SkipReason::BudgetExhausted),
                sampling_radius: sampling,
                noise_estimate: noise,
                lipschitz_estimate: lipschitz,
                center_value,
                next_center_value: center_value,
                best_value: cache.best_value,
            });
            break;
        }

        // (h) Interpolation model and trust-region step.
        let values = DVector::from_iterator(
            set.len(),
            set.points().iter().map(|point| cache.value_at(point)),
        );
        let model = build_mfn_model(&set, &values)
            .expect("the improvement sweep already factorized this geometry");
        let gnorm = model.gradient().norm();
        let solution = solve_trs(model.gradient(), model.hessian(), delta, 1.0);
        let snorm = solution.step.norm();

        // (i) Skip the trial when the set is uncertified and the step is
        // negligible; radius and center stay put and the safeguard is
        // bypassed.
        if !validity && snorm < config.skip_step_fraction * delta {
            let eval_count = cache.used - used_before;
            trace.iterations.push(IterationRecord {
                k,
                rho: None,
                accepted: false,
                delta_before: delta,
                delta_after: delta,
                gnorm: Some(gnorm),
                snorm: Some(snorm),
                lambda,
                validity,
                eval_count,
                skip_reason: Some(SkipReason::SmallStepNotValid),
                sampling_radius: sampling,
                noise_estimate: noise,
                lipschitz_estimate: lipschitz,
                center_value,
                next_center_value: center_value,
                best_value: cache.best_value,
            });
            prev_validity = validity;
            prev_hessian = Some(model.hessian().clone());
            if eval_count == 0 && !swapped && !rebuilt {
                // Nothing about the solver state changed, so the next
                // iteration would repeat this one verbatim.
                break;
            }
            continue;
        }

        // (j) Evaluate the trial point and rank it.
        let trial = &theta + &solution.step;
        let trial_eval = match cache.ensure(
            oracle,
            &trial,
            config.budget,
            k,
            EvalEvent::Trial,
            &mut trace,
        )? {
            Evaluated::Value(evaluation) => evaluation,
            Evaluated::Exhausted => {
                trace.iterations.push(IterationRecord {
                    k,
                    rho: None,
                    accepted: false,
                    delta_before: delta,
                    delta_after: delta,
                    gnorm: Some(gnorm),
                    snorm: Some(snorm),
                    lambda,
                    validity,
                    eval_count: cache.used - used_before,
                    skip_reason: Some(SkipReason::BudgetExhausted),
                    sampling_radius: sampling,
                    noise_estimate: noise,
                    lipschitz_estimate: lipschitz,
                    center_value,
                    next_center_value: center_value,
                    best_value: cache.best_value,
                });
                break;
            }
        };
        let push_outcome = set.push(trial.clone());
        let (rho, skip_reason) = match relaxed_rho(
            center_value,
            trial_eval.value,
            noise,
            config.r,
            solution.predicted_decrease,
        ) {
            Ok(ratio) => (Some(ratio), None),
            Err(Error::DegeneratePrediction { .. }) => {
                (None, Some(SkipReason::DegeneratePrediction))
            }
            Err(other) => return Err(other),
        };

        // (k) Acceptance and radius update.
        let accepted = rho.is_some_and(|ratio| ratio >= config.eta1);
        let delta_before = delta;
        if accepted && snorm > config.expand_step_fraction * delta_before {
            delta = (delta_before / config.gamma).min(config.delta_max);
        } else if !accepted && validity {
            delta = config.gamma * delta_before;
        }
        if accepted {
            set.recenter(push_outcome.index());
            theta = set.center().clone();
        }

        // (l) Best-point safeguard: never let the center's noisy value drift
        // above the best seen by more than the noise allowance.
        let incumbent_value = cache.value_at(&theta);
        if incumbent_value >= cache.best_value + config.r * noise {
            let best = cache
                .best_point
                .clone()
                .expect("best memory exists once anything was evaluated");
            if let Some(index) = set.position(&best) {
                set.recenter(index);
            } else {
                loop {
                    match set.near_duplicate(&best) {
                        Some(0) => {
                            set.replace(0, best.clone());
                            break;
                        }
                        Some(index) => set.remove(index),
                        None => break,
                    }
                }
                if set.position(&best) != Some(0) {
                    let outcome = set.push(best.clone());
                    set.recenter(outcome.index());
                }
            }
            theta = set.center().clone();
        }
        let next_center_value = cache.value_at(&theta);

        let eval_count = cache.used - used_before;
        trace.iterations.push(IterationRecord {
            k,
            rho,
            accepted,
            delta_before,
            delta_after: delta,
            gnorm: Some(gnorm),
            snorm: Some(snorm),
            lambda,
            validity,
            eval_count,
            skip_reason,
            sampling_radius: sampling,
            noise_estimate: noise,
            lipschitz_estimate: lipschitz,
            center_value,
            next_center_value,
            best_value: cache.best_value,
        });
        prev_validity = validity;
        prev_hessian = Some(model.hessian().clone());
        if eval_count == 0
            && !accepted
            && delta == delta_before
            && !swapped
            && !rebuilt
            && theta == theta_start
        {
            // Nothing about the solver state changed, so the next iteration
            // would repeat this one verbatim.
            break;
        }
    }

    let best_point = cache
        .best_point
        .clone()
        .expect("the budget covers at least the initial evaluation");
    Ok((best_point, cache.best_value, trace))
}

/// Runs [`solve`] with the noise estimate pinned to zero, which collapses
/// the method to a standard model-based trust-region loop: the sampling
/// radius equals the trust radius, the acceptance ratio is classical, and
/// the safeguard tolerates no drift. Used as the deterministic baseline in
/// benchmarks.
///
/// # Errors
///
/// Same as [`solve`].
pub fn deterministic_mbtr_solve<O: ZerothOrderOracle + ?Sized>(
    oracle: &mut O,
    theta0: &DVector<f64>,
    config: &SolverConfig,
) -> Result<(DVector<f64>, f64, RunTrace), Error> {
    let mut deterministic = config.clone();
    deterministic.noise_mode = NoiseEstimateMode::Exact(0.0);
    solve(oracle, theta0, &deterministic)
}
