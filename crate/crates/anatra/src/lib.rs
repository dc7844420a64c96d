//! Noise-aware derivative-free optimization with model-based trust regions.
//!
//! The solver minimizes a black-box objective that can only be sampled with
//! noise. It interpolates minimum-Frobenius-norm quadratic models through
//! carefully placed sample points, minimizes them inside a trust region, and
//! adapts to noise in three ways: interpolation points are spread over a
//! sampling ball whose radius never falls below the scale at which value
//! differences drown in noise, step acceptance grants the numerator an
//! additive noise allowance, and a best-point memory resets the incumbent
//! when its noisy value drifts above the best seen.
//!
//! The crate also ships the supporting geometry toolbox (Lagrange
//! polynomials, poisedness measurement and improvement, gradient error
//! certificates), a trust-region subproblem solver, synthetic and
//! quantum-circuit test oracles (a MaxCut expectation simulator with shot
//! sampling), an SPSA baseline, and JSONL run traces for offline analysis.
//!
//! # Example
//!
//! Minimize a noisy convex quadratic from a standing start:
//!
//! ```
//! use anatra::{solve, NoiseEstimateMode, NoiseSpec, SolverConfig};
//! use nalgebra::DVector;
//!
//! let mut oracle = anatra::noisy_quadratic(2, NoiseSpec::uniform(1e-3), 42);
//! let theta0 = DVector::from_vec(vec![1.0, 1.0]);
//!
//! let mut config = SolverConfig::for_dimension(2);
//! config.noise_mode = NoiseEstimateMode::Exact(1e-3);
//!
//! let (best, value, trace) = solve(&mut oracle, &theta0, &config)?;
//! assert!(value < 0.1);
//! assert!(best.norm() < 1.0);
//! assert!(trace.evaluations.len() <= config.budget);
//! # Ok::<(), anatra::Error>(())
//! ```

pub mod basis;
pub mod error;
pub mod geometry;
pub mod model;
pub mod oracle;
pub mod poisedness;
pub mod qaoa;
pub mod set;
pub mod solver;
pub mod spsa;
pub mod trace;
pub mod trs;

pub use error::{Error, OracleError};
pub use geometry::{affine_points, improve_poisedness, GeometryReport};
pub use model::{
    build_mfn_model, lagrange_polynomials, KktSystem, LagrangePolySet, QuadraticModel,
};
pub use oracle::{
    noisy_quadratic, noisy_rosenbrock, AdditiveNoiseOracle, NoiseKind, NoiseSpec,
    NoisyEvaluation, ZerothOrderOracle,
};
pub use poisedness::{gradient_error_bound, poisedness, ErrorBoundCertificate, Poisedness};
pub use qaoa::{exact_expectation, shot_oracle, Graph, QaoaCircuit, ShotOracle};
pub use set::{InterpolationSet, PushOutcome};
pub use solver::{
    deterministic_mbtr_solve, estimate_noise, relaxed_rho, solve, update_lipschitz,
    NoiseEstimateMode, SolverConfig,
};
pub use spsa::{spsa_solve, SpsaConfig};
pub use trace::{EvalEvent, EvalRecord, IterationRecord, RunTrace, SkipReason};
pub use trs::{solve_trs, TrsSolution};
