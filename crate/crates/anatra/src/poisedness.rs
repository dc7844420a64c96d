//! Poisedness measurement and gradient error certificates.
//!
//! The poisedness constant of an interpolation set over a ball is the
//! largest absolute value attained by any of its Lagrange polynomials on
//! that ball. Each per-polynomial maximization is an exact trust-region
//! subproblem solve on the polynomial and its negation, so the constant is
//! computed to optimization accuracy rather than by sampling.
//!
//! The certificate combines the poisedness constant, the pseudoinverse norm
//! of the scaled displacement matrix, noise bounds, and a gradient Lipschitz
//! constant into a worst-case bound on the model gradient error over the
//! sampling ball.

use crate::error::Error;
use crate::model::{lagrange_polynomials, QuadraticModel};
use crate::set::InterpolationSet;
use crate::trs::solve_trs;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Poisedness of a set over a ball: the peak absolute Lagrange value, the
/// index of the polynomial attaining it, and a point where it is attained.
#[derive(Debug, Clone)]
pub struct Poisedness {
    /// `max_i max_{x in ball} |l_i(x)|`; at least 1 when all points lie in
    /// the ball.
    pub lambda: f64,
    /// Index of the attaining polynomial (and interpolation point).
    pub worst_index: usize,
    /// A maximizer of `|l_i|` over the ball, in absolute coordinates.
    pub worst_point: DVector<f64>,
}

/// Worst-case model gradient error bound over a sampling ball, together
/// with the quantities it was assembled from.
#[derive(Debug, Clone)]
pub struct ErrorBoundCertificate {
    /// Poisedness constant of the set over the ball.
    pub lambda: f64,
    /// Spectral norm of the pseudoinverse of the scaled displacement matrix.
    pub pinv_norm: f64,
    /// Spectral norm of the model Hessian.
    pub hessian_norm: f64,
    /// Independent upper bound on the model Hessian norm from the set
    /// geometry and noise level alone; useful for cross-checking
    /// `hessian_norm`.
    pub hessian_norm_bound: f64,
    /// Sampling ball radius.
    pub radius: f64,
    /// Lipschitz constant of the objective gradient.
    pub lipschitz: f64,
    /// Absolute noise bound at the center point.
    pub noise_at_center: f64,
    /// Largest absolute noise bound over the non-center points.
    pub noise_max: f64,
    /// The gradient error bound itself: `|grad f(x) - grad m(x)|` is at most
    /// this value everywhere in the ball.
    pub bound: f64,
}

/// `min(1, 1/delta, 1/delta^2)`: the radius normalization in the Hessian
/// norm bound.
fn nu(delta: f64) -> f64 {
    (1.0f64).min(1.0 / delta).min(1.0 / (delta * delta))
}

/// Maximizes `|poly|` over the ball `B(center, radius)`, returning the peak
/// value and an attaining point in absolute coordinates.
///
/// The polynomial is re-expressed about the ball center, then its maximum
/// and minimum over the ball are found with exact trust-region solves (a
/// closed form in one dimension, an eigenvalue computation when the shifted
/// gradient vanishes).
pub(crate) fn poly_ball_max_abs(
    poly: &QuadraticModel,
    center: &DVector<f64>,
    radius: f64,
) -> (f64, DVector<f64>) {
    let t0 = center - poly.center();
    let value0 = poly.evaluate_displacement(&t0);
    let g = poly.gradient_at(center);
    let h = poly.hessian();

    if center.len() == 1 {
        return max_abs_1d(value0, g[0], h[(0, 0)], center, radius);
    }

    let (rise, rise_point, drop, drop_point) = if g.iter().all(|&gi| gi == 0.0) {
        let eigen = SymmetricEigen::new(h.clone());
        let (max_i, min_i) = extreme_indices(&eigen.eigenvalues);
        let lam_max = eigen.eigenvalues[max_i];
        let lam_min = eigen.eigenvalues[min_i];
        let rise = (0.5 * lam_max * radius * radius).max(0.0);
        let drop = (-0.5 * lam_min * radius * radius).max(0.0);
        let rise_point = if lam_max > 0.0 {
            eigen.eigenvectors.column(max_i) * radius
        } else {
            DVector::zeros(center.len())
        };
        let drop_point = if lam_min < 0.0 {
            eigen.eigenvectors.column(min_i) * radius
        } else {
            DVector::zeros(center.len())
        };
        (rise, rise_point, drop, drop_point)
    } else {
        let up = solve_trs(&(-&g), &(-h), radius, 1.0);
        let down = solve_trs(&g, h, radius, 1.0);
        (up.predicted_decrease, up.step, down.predicted_decrease, down.step)
    };

    let high = value0 + rise;
    let low = value0 - drop;
    if high.abs() >= low.abs() {
        (high.abs(), center + rise_point)
    } else {
        (low.abs(), center + drop_point)
    }
}

fn extreme_indices(eigenvalues: &DVector<f64>) -> (usize, usize) {
    let mut max_i = 0;
    let mut min_i = 0;
    for i in 1..eigenvalues.len() {
        if eigenvalues[i] > eigenvalues[max_i] {
            max_i = i;
        }
        if eigenvalues[i] < eigenvalues[min_i] {
            min_i = i;
        }
    }
    (max_i, min_i)
}

/// Closed-form extreme of `value0 + g u + h u^2 / 2` for `|u| <= radius`:
/// candidates are the interval endpoints and the interior stationary point.
fn max_abs_1d(
    value0: f64,
    g: f64,
    h: f64,
    center: &DVector<f64>,
    radius: f64,
) -> (f64, DVector<f64>) {
    let mut candidates = vec![-radius, radius];
    if h != 0.0 {
        let stationary = -g / h;
        if stationary.abs() < radius {
            candidates.push(stationary);
        }
    }
    let mut best_u = 0.0;
    let mut best = value0.abs();
    for &u in &candidates {
        let v = (value0 + g * u + 0.5 * h * u * u).abs();
        if v > best {
            best = v;
            best_u = u;
        }
    }
    let mut point = center.clone();
    point[0] += best_u;
    (best, point)
}

/// Computes the poisedness constant of `set` over `B(center, radius)`.
///
/// # Errors
///
/// [`Error::SingularGeometry`] when the Lagrange polynomials cannot be
/// computed.
///
/// # Panics
///
/// Panics if `radius` is not strictly positive or dimensions disagree.
pub fn poisedness(
    set: &InterpolationSet,
    center: &DVector<f64>,
    radius: f64,
) -> Result<Poisedness, Error> {
    assert!(radius > 0.0, "ball radius must be positive");
    assert_eq!(center.len(), set.dimension(), "ball center dimension mismatch");
    let polys = lagrange_polynomials(set)?;
    let mut lambda = f64::NEG_INFINITY;
    let mut worst_index = 0;
    let mut worst_point = center.clone();
    for i in 0..polys.len() {
        let (value, point) = poly_ball_max_abs(polys.poly(i), center, radius);
        if value > lambda {
            lambda = value;
            worst_index = i;
            worst_point = point;
        }
    }
    Ok(Poisedness { lambda, worst_index, worst_point })
}

/// Assembles the gradient error certificate for a model built on `set` over
/// the ball `B(x0, radius)`, where `x0` is the set's center.
///
/// `noise_at_center` bounds the absolute evaluation error at the center;
/// `noise_max` bounds it over the remaining points.
///
/// # Panics
///
/// Panics if any set point lies outside the ball (beyond a relative slack
/// of `1e-8`), if the set geometry is singular, if the model was built
/// about a different center, or if `radius`, `lipschitz`, or a noise bound
/// is out of range.
pub fn gradient_error_bound(
    set: &InterpolationSet,
    model: &QuadraticModel,
    radius: f64,
    lipschitz: f64,
    noise_at_center: f64,
    noise_max: f64,
) -> ErrorBoundCertificate {
    assert!(radius > 0.0, "ball radius must be positive");
    assert!(lipschitz > 0.0, "gradient Lipschitz constant must be positive");
    assert!(noise_at_center >= 0.0 && noise_max >= 0.0, "noise bounds must be nonnegative");
    assert_eq!(model.center(), set.center(), "model must be centered on the set");
    let x0 = set.center();
    for i in 0..set.len() {
        let dist = (set.point(i) - x0).norm();
        assert!(
            dist <= radius * (1.0 + 1e-8),
            "point {i} lies outside the sampling ball ({dist} > {radius})"
        );
    }

    let d = set.dimension();
    let p = set.len() - 1;
    let poise = poisedness(set, x0, radius)
        .expect("certificate requires a poised interpolation set");
    let lambda = poise.lambda;

    let mut scaled = DMatrix::zeros(p, d);
    for i in 1..set.len() {
        let row = (set.point(i) - x0) / radius;
        scaled.row_mut(i - 1).copy_from(&row.transpose());
    }
    let svd = scaled.svd(false, false);
    let smin = svd.singular_values.min();
    let pinv_norm = if smin > 0.0 { 1.0 / smin } else { f64::INFINITY };

    let hessian_norm = model.hessian_norm();
    let bound = (p as f64 + 1.0).sqrt()
        * pinv_norm
        * ((lipschitz + hessian_norm) * radius + (noise_at_center + noise_max) / radius);

    let dim_factor = (((d + 1) * (d + 2)) as f64).sqrt();
    let nu_delta = nu(radius);
    let hessian_norm_bound = 4.0 * (p as f64 + 1.0) * lambda * lipschitz * dim_factor / nu_delta
        + 8.0 * lambda * dim_factor * (p as f64 + 1.0) * noise_max
            / (radius * radius * nu_delta);

    ErrorBoundCertificate {
        lambda,
        pinv_norm,
        hessian_norm,
        hessian_norm_bound,
        radius,
        lipschitz,
        noise_at_center,
        noise_max,
        bound,
    }
}
