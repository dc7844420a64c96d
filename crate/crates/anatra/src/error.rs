//! Error types shared across the crate.

use crate::trace::RunTrace;
use thiserror::Error;

/// Failure raised by a [`ZerothOrderOracle`](crate::oracle::ZerothOrderOracle)
/// when an evaluation cannot be produced.
#[derive(Debug, Clone, Error)]
#[error("oracle evaluation failed: {0}")]
pub struct OracleError(pub String);

/// Errors produced by model construction, geometry maintenance, and the
/// solver loop.
#[derive(Debug, Error)]
pub enum Error {
    /// The interpolation saddle-point system could not be factorized to
    /// working precision. The caller should rebuild the set with
    /// [`affine_points`](crate::geometry::affine_points) and retry.
    #[error("interpolation geometry is singular (condition estimate {condition:.3e})")]
    SingularGeometry {
        /// Condition estimate of the saddle-point matrix.
        condition: f64,
    },

    /// The model predicted no usable decrease, so the acceptance ratio is
    /// meaningless. The iteration is treated as rejected.
    #[error("predicted decrease {predicted:.3e} is too small to form an acceptance ratio")]
    DegeneratePrediction {
        /// The predicted decrease returned by the subproblem solver.
        predicted: f64,
    },

    /// The solver was configured to read per-evaluation noise scales, but the
    /// oracle did not report one.
    #[error("oracle reported no per-evaluation noise scale in standard-error mode")]
    MissingNoiseInfo,

    /// The evaluation budget cannot cover even one model-building iteration.
    #[error("budget {budget} is below the minimum of {required} evaluations")]
    BudgetTooSmall {
        /// The configured budget.
        budget: usize,
        /// Minimum budget for the problem dimension (d + 2).
        required: usize,
    },

    /// The oracle failed mid-run; the trace collected so far is attached.
    #[error("oracle failure after {} evaluations: {message}", partial_trace.evaluations.len())]
    OracleFailure {
        /// The oracle's own description of the failure.
        message: String,
        /// Everything recorded before the failure.
        partial_trace: Box<RunTrace>,
    },

    /// Shot-based sampling needs at least two shots to form a standard error.
    #[error("shot count {shots} is below the minimum of 2")]
    InvalidShots {
        /// The requested shot count.
        shots: usize,
    },

    /// A graph failed validation or could not be parsed.
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    /// A solver or comparator configuration violated its invariants.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
