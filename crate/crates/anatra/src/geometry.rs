//! Interpolation-set geometry maintenance.
//!
//! Two routines keep the point set usable for modeling: a
//! poisedness-improvement loop that swaps the worst-placed point for the
//! maximizer of its Lagrange polynomial until the poisedness constant drops
//! below a threshold, and a completion routine that assembles an affinely
//! independent set of `d + 1` points from evaluation history, appending
//! scaled orthogonal offsets for whatever directions the history misses.

use crate::error::Error;
use crate::model::lagrange_polynomials;
use crate::poisedness::poly_ball_max_abs;
use crate::set::InterpolationSet;
use nalgebra::DVector;

/// Hard safety cap on improvement iterations regardless of the caller's
/// requested maximum.
pub const MAX_IMPROVE_ITERATIONS: usize = 100;

/// Outcome of a poisedness-improvement run.
#[derive(Debug, Clone)]
pub struct GeometryReport {
    /// The final interpolation set after any swaps.
    pub set: InterpolationSet,
    /// True exactly when the final measured poisedness is at most the
    /// requested threshold.
    pub valid: bool,
    /// Number of swap iterations performed.
    pub iterations: usize,
    /// Each swap as (replaced index, inserted point), in order.
    pub swaps: Vec<(usize, DVector<f64>)>,
    /// Poisedness of the final set over the ball, as last measured.
    pub lambda: f64,
}

/// Per-polynomial ball maxima of the set's Lagrange polynomials.
fn index_values(
    set: &InterpolationSet,
    center: &DVector<f64>,
    radius: f64,
) -> Result<Vec<(f64, DVector<f64>)>, Error> {
    let polys = lagrange_polynomials(set)?;
    Ok((0..polys.len())
        .map(|i| poly_ball_max_abs(polys.poly(i), center, radius))
        .collect())
}

/// Iteratively improves the poisedness of `set` over `B(center, radius)`.
///
/// Each iteration measures the poisedness constant; if it exceeds
/// `lambda_bar`, the non-center point whose Lagrange polynomial peaks
/// highest is replaced by that polynomial's ball maximizer. The center
/// (index 0) is never swapped out, since it carries the incumbent iterate;
/// if the center's own polynomial is the only offender the loop stops with
/// `valid = false`.
///
/// The loop runs at most `min(max_iterations, 100)` swaps.
///
/// # Errors
///
/// [`Error::SingularGeometry`] when the set (incoming or mid-loop) does not
/// admit Lagrange polynomials; the caller should rebuild with
/// [`affine_points`].
///
/// # Panics
///
/// Panics unless `lambda_bar > 1` and `radius > 0`.
pub fn improve_poisedness(
    set: InterpolationSet,
    center: &DVector<f64>,
    radius: f64,
    lambda_bar: f64,
    max_iterations: usize,
) -> Result<GeometryReport, Error> {
    assert!(lambda_bar > 1.0, "poisedness threshold must exceed 1");
    assert!(radius > 0.0, "ball radius must be positive");
    let cap = max_iterations.min(MAX_IMPROVE_ITERATIONS);
    let mut set = set;
    let mut swaps: Vec<(usize, DVector<f64>)> = Vec::new();
    let mut iterations = 0;
    loop {
        let values = index_values(&set, center, radius)?;
        let lambda = values.iter().map(|(v, _)| *v).fold(f64::NEG_INFINITY, f64::max);
        if lambda <= lambda_bar {
            return Ok(GeometryReport { set, valid: true, iterations, swaps, lambda });
        }
        if iterations == cap {
            return Ok(GeometryReport { set, valid: false, iterations, swaps, lambda });
        }
        let (worst, &(worst_value, ref worst_point)) = values
            .iter()
            .enumerate()
            .skip(1)
            .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
            .expect("sets always hold at least two points");
        if worst_value <= lambda_bar || set.position(worst_point).is_some() {
            // Only the center's polynomial exceeds the threshold (or the
            // proposed swap would duplicate an existing point, which the
            // delta-property precludes up to roundoff); no swap can help.
            return Ok(GeometryReport { set, valid: false, iterations, swaps, lambda });
        }
        set.replace(worst, worst_point.clone());
        swaps.push((worst, worst_point.clone()));
        iterations += 1;
    }
}

/// Builds an affinely independent set of exactly `d + 1` points around
/// `center` from evaluation `history`, preferring earlier entries (callers
/// pass most-recently evaluated points first).
///
/// A history point `x` is accepted when it lies within the sampling ball
/// (`|x - center| <= c_s * delta`) and the component of its scaled
/// displacement orthogonal to the directions already accepted has norm at
/// least `tau`. Directions still missing after the scan are filled with
/// orthogonal offsets of length `c_s * delta` chosen greedily from the
/// coordinate basis.
///
/// # Panics
///
/// Panics unless `c_s >= 1`, `delta > 0`, `tau` lies in `(0, 1/c_s]`, and
/// `history` contains `center`.
pub fn affine_points(
    history: &[DVector<f64>],
    center: &DVector<f64>,
    c_s: f64,
    delta: f64,
    tau: f64,
) -> InterpolationSet {
    assert!(c_s >= 1.0, "sampling radius factor must be at least 1");
    assert!(delta > 0.0, "sampling radius must be positive");
    assert!(tau > 0.0 && tau <= 1.0 / c_s, "projection threshold out of range");
    let d = center.len();
    assert!(d >= 1, "dimension must be at least 1");
    assert!(
        history.iter().any(|x| x.len() == d && x.iter().zip(center.iter()).all(|(a, b)| a == b)),
        "history must contain the center point"
    );

    let scale = c_s * delta;
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(d);
    let mut accepted: Vec<DVector<f64>> = Vec::with_capacity(d);
    for x in history {
        if accepted.len() == d {
            break;
        }
        let displacement = x - center;
        if displacement.norm() > scale {
            continue;
        }
        let residual = orthogonal_residual(&(displacement / scale), &basis);
        if residual.norm() >= tau {
            basis.push(residual.normalize());
            accepted.push(x.clone());
        }
    }

    let mut points = Vec::with_capacity(d + 1);
    points.push(center.clone());
    points.extend(accepted);
    while basis.len() < d {
        let (_, residual) = (0..d)
            .map(|j| {
                let mut e = DVector::zeros(d);
                e[j] = 1.0;
                let r = orthogonal_residual(&e, &basis);
                (r.norm(), r)
            })
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .expect("dimension is at least 1");
        let direction = residual.normalize();
        points.push(center + &direction * scale);
        basis.push(direction);
    }
    InterpolationSet::from_points(points)
}

/// Component of `v` orthogonal to the span of `basis`, with one
/// re-orthogonalization pass for numerical stability.
fn orthogonal_residual(v: &DVector<f64>, basis: &[DVector<f64>]) -> DVector<f64> {
    let mut r = v.clone();
    for _ in 0..2 {
        for q in basis {
            let coeff = q.dot(&r);
            r -= q * coeff;
        }
    }
    r
}
