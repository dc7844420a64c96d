//! Simultaneous-perturbation stochastic approximation baseline.
//!
//! Each step draws one Rademacher direction, evaluates the objective at the
//! two symmetric perturbations of the iterate along it, and moves against
//! the resulting two-point gradient estimate. The iterate itself is never
//! evaluated; only the perturbed points spend budget, and the best noisy
//! value among them is what the run reports.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::oracle::ZerothOrderOracle;
use crate::trace::{EvalEvent, EvalRecord, RunTrace};

/// Gain schedules and run limits for [`spsa_solve`].
///
/// Step `k` (from zero) uses step gain `a / (k + 1 + stability)^alpha` and
/// perturbation size `c0 / (k + 1)^gamma`; both sequences are positive and
/// nonincreasing.
#[derive(Debug, Clone)]
pub struct SpsaConfig {
    /// Step-gain numerator.
    pub a: f64,
    /// Stability constant added to the step-gain denominator.
    pub stability: f64,
    /// Step-gain decay exponent.
    pub alpha: f64,
    /// Initial perturbation size.
    pub c0: f64,
    /// Perturbation decay exponent.
    pub gamma: f64,
    /// Maximum number of oracle evaluations.
    pub budget: usize,
    /// Seed for the Rademacher direction stream.
    pub seed: u64,
}

impl SpsaConfig {
    /// Textbook gain schedule (`a = 0.1`, `stability = 0`, `alpha = 0.602`,
    /// `c0 = 0.1`, `gamma = 0.101`) with the given budget and seed.
    pub fn new(budget: usize, seed: u64) -> Self {
        SpsaConfig {
            a: 0.1,
            stability: 0.0,
            alpha: 0.602,
            c0: 0.1,
            gamma: 0.101,
            budget,
            seed,
        }
    }

    /// Checks every invariant.
    ///
    /// # Errors
    ///
    /// [`Error::InvalidConfig`] when a gain parameter is out of range or the
    /// budget cannot cover one two-evaluation step.
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "step-gain numerator a = {} must be finite and positive",
                self.a
            )));
        }
        if !(self.c0 > 0.0 && self.c0.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "perturbation size c0 = {} must be finite and positive",
                self.c0
            )));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "step-gain exponent alpha = {} must be finite and nonnegative",
                self.alpha
            )));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "perturbation exponent gamma = {} must be finite and nonnegative",
                self.gamma
            )));
        }
        if !(self.stability >= 0.0 && self.stability.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "stability constant {} must be finite and nonnegative",
                self.stability
            )));
        }
        if self.budget < 2 {
            return Err(Error::InvalidConfig(format!(
                "budget {} cannot cover one two-evaluation step",
                self.budget
            )));
        }
        Ok(())
    }
}

/// Running bookkeeping for one SPSA run.
struct SpsaRun {
    trace: RunTrace,
    used: usize,
    best_point: Option<DVector<f64>>,
    best_value: f64,
}

impl SpsaRun {
    fn charge<O: ZerothOrderOracle + ?Sized>(
        &mut self,
        oracle: &mut O,
        point: &DVector<f64>,
        step: usize,
    ) -> Result<f64, Error> {
        let evaluation = oracle.evaluate(point).map_err(|failure| Error::OracleFailure {
            message: failure.0,
            partial_trace: Box::new(self.trace.clone()),
        })?;
        self.used += 1;
        self.trace.evaluations.push(EvalRecord {
            eval_index: self.used,
            point: point.iter().copied().collect(),
            noisy_value: evaluation.value,
            true_value: oracle.true_value(point),
            iteration: step,
            event: EvalEvent::Trial,
        });
        if evaluation.value < self.best_value {
            self.best_value = evaluation.value;
            self.best_point = Some(point.clone());
        }
        Ok(evaluation.value)
    }
}

/// Runs SPSA from `theta0` until fewer than two evaluations remain,
/// returning the evaluated point with the lowest noisy value, that value,
/// and the evaluation trace (SPSA has no per-iteration summaries, so the
/// trace's iteration list is empty).
///
/// # Errors
///
/// [`Error::InvalidConfig`] when the configuration fails validation and
/// [`Error::OracleFailure`] carrying the partial trace when an evaluation
/// fails.
///
/// # Panics
///
/// Panics when `theta0`'s length differs from the oracle dimension.
pub fn spsa_solve<O: ZerothOrderOracle + ?Sized>(
    oracle: &mut O,
    theta0: &DVector<f64>,
    config: &SpsaConfig,
) -> Result<(DVector<f64>, f64, RunTrace), Error> {
    let d = oracle.dimension();
    assert_eq!(theta0.len(), d, "starting point dimension must match the oracle");
    config.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut run = SpsaRun {
        trace: RunTrace::new(),
        used: 0,
        best_point: None,
        best_value: f64::INFINITY,
    };
    let mut theta = theta0.clone();
    let mut step = 0;
    while run.used + 2 <= config.budget {
        let step_gain =
            config.a / ((step as f64) + 1.0 + config.stability).powf(config.alpha);
        let perturbation = config.c0 / ((step as f64) + 1.0).powf(config.gamma);
        let direction =
            DVector::from_fn(d, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 });
        let plus = &theta + perturbation * &direction;
        let minus = &theta - perturbation * &direction;
        let value_plus = run.charge(oracle, &plus, step)?;
        let value_minus = run.charge(oracle, &minus, step)?;
        // The two-point estimate divides by the perturbation componentwise;
        // Rademacher entries are their own reciprocals, so this is a scalar
        // times the direction.
        let slope = (value_plus - value_minus) / (2.0 * perturbation);
        theta -= step_gain * slope * &direction;
        step += 1;
    }

    let best_point = run
        .best_point
        .clone()
        .expect("a validated budget covers at least one step");
    Ok((best_point, run.best_value, run.trace))
}
