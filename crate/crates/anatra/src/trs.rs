//! Trust-region subproblem solver.
//!
//! Minimizes the quadratic `q(s) = g's + s'Hs/2` over the ball `|s| <= delta`
//! using an eigendecomposition-based More-Sorensen method with a Cauchy-point
//! safeguard, including the hard case. The returned step always achieves at
//! least the Cauchy fraction of decrease, so the fraction-of-Cauchy-decrease
//! inequality holds with `kappa = 1`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Relative tolerance for deciding the step lies on the ball boundary.
const BOUNDARY_TOL: f64 = 1e-8;

/// Relative residual target for the boundary equation `|s(sigma)| = delta`.
const SECULAR_TOL: f64 = 1e-10;

/// Iteration cap for the safeguarded Newton iteration on the secular
/// equation before falling back to the Cauchy point.
const MAX_SECULAR_ITERS: usize = 100;

/// Result of a trust-region subproblem solve.
#[derive(Debug, Clone)]
pub struct TrsSolution {
    /// Minimizing step, with `|step| <= delta`.
    pub step: DVector<f64>,
    /// Predicted decrease `-(g's + s'Hs/2)`; never negative.
    pub predicted_decrease: f64,
    /// Whether the step lies on the ball boundary, up to a relative
    /// tolerance of `1e-8 * delta`.
    pub on_boundary: bool,
}

fn quadratic_value(g: &DVector<f64>, h: &DMatrix<f64>, s: &DVector<f64>) -> f64 {
    g.dot(s) + 0.5 * (h * s).dot(s)
}

/// The Cauchy step: the minimizer of the quadratic along `-g` within the
/// ball. Assumes `g` is nonzero.
fn cauchy_step(g: &DVector<f64>, h: &DMatrix<f64>, delta: f64) -> DVector<f64> {
    let gnorm = g.norm();
    let curvature = (h * g).dot(g);
    let t = if curvature <= 0.0 {
        delta / gnorm
    } else {
        (gnorm.powi(2) / curvature).min(delta / gnorm)
    };
    g * (-t)
}

fn solution_from_step(
    g: &DVector<f64>,
    h: &DMatrix<f64>,
    delta: f64,
    step: DVector<f64>,
) -> TrsSolution {
    let mut step = step;
    let norm = step.norm();
    if norm > delta {
        step *= delta / norm;
    }
    let decrease = -quadratic_value(g, h, &step);
    TrsSolution {
        on_boundary: (step.norm() - delta).abs() <= BOUNDARY_TOL * delta,
        step,
        predicted_decrease: decrease.max(0.0),
    }
}

/// Step for a fixed multiplier: `s(sigma) = -sum_i (q_i'g / (lam_i + sigma)) q_i`.
fn shifted_step(eigen: &SymmetricEigen<f64, nalgebra::Dyn>, gq: &DVector<f64>, sigma: f64) -> DVector<f64> {
    let mut coeffs = DVector::zeros(gq.len());
    for i in 0..gq.len() {
        let denom = eigen.eigenvalues[i] + sigma;
        coeffs[i] = if denom.abs() > 0.0 { -gq[i] / denom } else { 0.0 };
    }
    &eigen.eigenvectors * coeffs
}

/// Exact subproblem minimizer via the eigendecomposition of `H`.
fn more_sorensen(g: &DVector<f64>, h: &DMatrix<f64>, delta: f64) -> Option<DVector<f64>> {
    let eigen = SymmetricEigen::new(h.clone());
    let lambda_min = eigen.eigenvalues.min();
    let gq = eigen.eigenvectors.transpose() * g;

    // Interior solution: H positive definite and the Newton step fits.
    if lambda_min > 0.0 {
        let newton = shifted_step(&eigen, &gq, 0.0);
        if newton.norm() <= delta {
            return Some(newton);
        }
    }

    // Hard case: g has no component along the most negative eigenspace, so
    // the boundary solution needs an explicit eigenvector contribution.
    let gap = 1e-12 * (1.0 + gq.amax());
    let hard = lambda_min <= 0.0
        && (0..gq.len())
            .filter(|&i| (eigen.eigenvalues[i] - lambda_min).abs() <= 1e-10 * (1.0 + lambda_min.abs()))
            .all(|i| gq[i].abs() <= gap);
    if hard {
        let pseudo = shifted_step_skipping_min(&eigen, &gq, -lambda_min);
        let pnorm2 = pseudo.norm_squared();
        if pnorm2 <= delta * delta {
            let tau = (delta * delta - pnorm2).sqrt();
            let min_index = eigen
                .eigenvalues
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .expect("eigenvalues are nonempty");
            let qmin = eigen.eigenvectors.column(min_index).clone_owned();
            return Some(pseudo + qmin * tau);
        }
    }

    // Boundary solution: Newton on phi(sigma) = 1/delta - 1/|s(sigma)| with
    // a bisection safeguard on a bracketing interval.
    let mut lo = (-lambda_min).max(0.0);
    let mut hi = g.norm() / delta + eigen.eigenvalues.iter().fold(0.0, |acc: f64, &e| acc.max(e.abs()));
    let mut sigma = (lo + 1e-8 * (1.0 + lo)).max(0.5 * (lo + hi).min(lo + 1.0));
    for _ in 0..MAX_SECULAR_ITERS {
        let s = shifted_step(&eigen, &gq, sigma);
        let norm = s.norm();
        if norm == 0.0 {
            sigma = 0.5 * (lo + sigma);
            continue;
        }
        if (norm - delta).abs() <= SECULAR_TOL * delta {
            return Some(s);
        }
        if norm > delta {
            lo = sigma;
        } else {
            hi = sigma;
        }
        // phi(sigma) = 1/delta - 1/|s|; phi'(sigma) = (s' ds/dsigma)/|s|^3
        // with ds/dsigma = (H + sigma I)^(-1) s componentwise in the
        // eigenbasis.
        let mut dnorm = 0.0;
        let sq = eigen.eigenvectors.transpose() * &s;
        for i in 0..gq.len() {
            let denom = eigen.eigenvalues[i] + sigma;
            if denom.abs() > 0.0 {
                dnorm -= sq[i] * sq[i] / denom;
            }
        }
        let phi = 1.0 / delta - 1.0 / norm;
        let dphi = dnorm / norm.powi(3);
        let newton = if dphi != 0.0 { sigma - phi / dphi } else { sigma };
        sigma = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    None
}

/// As [`shifted_step`], but dropping components in the minimal eigenspace;
/// used to build the hard-case pseudo-solution.
fn shifted_step_skipping_min(
    eigen: &SymmetricEigen<f64, nalgebra::Dyn>,
    gq: &DVector<f64>,
    sigma: f64,
) -> DVector<f64> {
    let lambda_min = eigen.eigenvalues.min();
    let mut coeffs = DVector::zeros(gq.len());
    for i in 0..gq.len() {
        if (eigen.eigenvalues[i] - lambda_min).abs() <= 1e-10 * (1.0 + lambda_min.abs()) {
            continue;
        }
        coeffs[i] = -gq[i] / (eigen.eigenvalues[i] + sigma);
    }
    &eigen.eigenvectors * coeffs
}

/// Minimizes `g's + s'Hs/2` over `|s| <= delta`.
///
/// A zero gradient returns the zero step with zero predicted decrease. The
/// solution satisfies the fraction-of-Cauchy-decrease inequality
///
/// ```text
/// predicted_decrease >= (kappa_fcd / 2) |g| min(|g| / |H|, delta)
/// ```
///
/// with `kappa_fcd = 1`, reading `min(...) = delta` when `H` is zero.
///
/// # Panics
///
/// Panics if `delta` is not strictly positive, if `kappa_fcd` is outside
/// `(0, 1]`, or if dimensions disagree.
pub fn solve_trs(g: &DVector<f64>, h: &DMatrix<f64>, delta: f64, kappa_fcd: f64) -> TrsSolution {
    assert!(delta > 0.0, "trust radius must be positive");
    assert!(kappa_fcd > 0.0 && kappa_fcd <= 1.0, "kappa_fcd must lie in (0, 1]");
    assert_eq!(g.len(), h.nrows(), "gradient and hessian dimensions disagree");
    assert_eq!(h.nrows(), h.ncols(), "hessian must be square");

    if g.iter().all(|&gi| gi == 0.0) {
        return TrsSolution {
            step: DVector::zeros(g.len()),
            predicted_decrease: 0.0,
            on_boundary: false,
        };
    }

    let cauchy = cauchy_step(g, h, delta);
    if h.iter().all(|&hij| hij == 0.0) {
        // Pure linear model: the Cauchy point is exact.
        return solution_from_step(g, h, delta, cauchy);
    }

    let best = match more_sorensen(g, h, delta) {
        Some(exact) if -quadratic_value(g, h, &exact) >= -quadratic_value(g, h, &cauchy) => exact,
        _ => cauchy,
    };
    solution_from_step(g, h, delta, best)
}
