//! Noisy zeroth-order oracles and synthetic test problems.
//!
//! An oracle returns objective values corrupted by additive noise, together
//! with an optional per-evaluation noise-scale estimate. Two synthetic
//! problems are provided: a convex quadratic and the two-dimensional
//! Rosenbrock function, each perturbed by either uniformly bounded or
//! gaussian noise. Each oracle instance owns one seeded RNG stream, so
//! parallel trials with distinct instances never share randomness and a
//! fixed seed plus a fixed call sequence reproduces values exactly.

use crate::error::OracleError;
use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// One noisy objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyEvaluation {
    /// The noisy value returned by the oracle.
    pub value: f64,
    /// Per-evaluation noise-scale estimate: the bound for uniformly bounded
    /// noise, the standard deviation (or standard error) otherwise. `None`
    /// when the oracle cannot characterize its own noise.
    pub noise_scale: Option<f64>,
}

/// Noise family for the synthetic oracles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    /// Deterministically bounded: draws from `U[-level, level]`.
    Uniform,
    /// Gaussian: draws from `N(0, level^2)`.
    Gaussian,
}

/// An additive noise description: a family and a level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Distribution family.
    pub kind: NoiseKind,
    /// Noise level: the half-width of the uniform support or the gaussian
    /// standard deviation. Must be nonnegative and finite.
    pub level: f64,
}

impl NoiseSpec {
    /// Uniformly bounded noise on `[-level, level]`.
    ///
    /// # Panics
    ///
    /// Panics unless `level` is nonnegative and finite.
    pub fn uniform(level: f64) -> Self {
        assert!(level >= 0.0 && level.is_finite(), "noise level must be nonnegative");
        Self { kind: NoiseKind::Uniform, level }
    }

    /// Gaussian noise with standard deviation `level`.
    ///
    /// # Panics
    ///
    /// Panics unless `level` is nonnegative and finite.
    pub fn gaussian(level: f64) -> Self {
        assert!(level >= 0.0 && level.is_finite(), "noise level must be nonnegative");
        Self { kind: NoiseKind::Gaussian, level }
    }

    /// Draws one noise realization. A zero level draws nothing from the
    /// stream, so noiseless oracles stay bit-reproducible regardless of how
    /// often they are called.
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        assert!(self.level >= 0.0 && self.level.is_finite(), "noise level must be nonnegative");
        if self.level == 0.0 {
            return 0.0;
        }
        match self.kind {
            NoiseKind::Uniform => rng.random_range(-self.level..=self.level),
            NoiseKind::Gaussian => {
                let normal = Normal::new(0.0, self.level)
                    .expect("level is positive and finite");
                normal.sample(rng)
            }
        }
    }
}

/// A noisy objective: `evaluate` draws fresh noise on every call, while
/// `true_value` (when available) reports the noiseless objective for
/// benchmarking only; solvers must never branch on it.
pub trait ZerothOrderOracle {
    /// Problem dimension `d`.
    fn dimension(&self) -> usize;

    /// Evaluates the noisy objective at `theta`.
    fn evaluate(&mut self, theta: &DVector<f64>) -> Result<NoisyEvaluation, OracleError>;

    /// Noiseless objective value, if this oracle can compute one.
    fn true_value(&self, _theta: &DVector<f64>) -> Option<f64> {
        None
    }
}

/// A deterministic objective perturbed by additive noise from one seeded
/// stream.
#[derive(Debug, Clone)]
pub struct AdditiveNoiseOracle {
    dimension: usize,
    objective: fn(&DVector<f64>) -> f64,
    noise: NoiseSpec,
    rng: ChaCha8Rng,
}

impl ZerothOrderOracle for AdditiveNoiseOracle {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn evaluate(&mut self, theta: &DVector<f64>) -> Result<NoisyEvaluation, OracleError> {
        assert_eq!(theta.len(), self.dimension, "evaluation point dimension mismatch");
        let value = (self.objective)(theta) + self.noise.draw(&mut self.rng);
        Ok(NoisyEvaluation { value, noise_scale: Some(self.noise.level) })
    }

    fn true_value(&self, theta: &DVector<f64>) -> Option<f64> {
        Some((self.objective)(theta))
    }
}

fn quadratic(theta: &DVector<f64>) -> f64 {
    theta.dot(theta)
}

fn rosenbrock(theta: &DVector<f64>) -> f64 {
    100.0 * (theta[1] - theta[0] * theta[0]).powi(2) + (1.0 - theta[0]).powi(2)
}

/// The convex quadratic `f(theta) = theta' theta` plus additive noise.
///
/// # Panics
///
/// Panics unless `d >= 1`.
pub fn noisy_quadratic(d: usize, noise: NoiseSpec, seed: u64) -> AdditiveNoiseOracle {
    assert!(d >= 1, "dimension must be at least 1");
    AdditiveNoiseOracle {
        dimension: d,
        objective: quadratic,
        noise,
        rng: ChaCha8Rng::seed_from_u64(seed),
    }
}

/// The two-dimensional Rosenbrock function
/// `100 (theta_2 - theta_1^2)^2 + (1 - theta_1)^2` plus additive noise; its
/// global minimum is 0 at `(1, 1)`.
pub fn noisy_rosenbrock(noise: NoiseSpec, seed: u64) -> AdditiveNoiseOracle {
    AdditiveNoiseOracle {
        dimension: 2,
        objective: rosenbrock,
        noise,
        rng: ChaCha8Rng::seed_from_u64(seed),
    }
}
