//! Shared helpers for the contract suites: seeded generators plus
//! independent reference implementations (least-norm interpolation by
//! explicit projection, a dense Kronecker-product circuit simulator, brute
//! force cuts) that the library is checked against.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use anatra::{InterpolationSet, KktSystem, QuadraticModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform draw from the closed ball of the given radius around `center`,
/// by rejection from the enclosing cube.
pub fn random_point_in_ball(
    rng: &mut ChaCha8Rng,
    center: &DVector<f64>,
    radius: f64,
) -> DVector<f64> {
    let d = center.len();
    loop {
        let offset = DVector::from_fn(d, |_, _| rng.random_range(-1.0..=1.0));
        if offset.norm() <= 1.0 {
            return center + radius * offset;
        }
    }
}

/// Uniform draw from the sphere of the given radius around `center`.
pub fn random_point_on_sphere(
    rng: &mut ChaCha8Rng,
    center: &DVector<f64>,
    radius: f64,
) -> DVector<f64> {
    let d = center.len();
    loop {
        let offset = DVector::from_fn(d, |_, _| rng.random_range(-1.0..=1.0));
        let norm = offset.norm();
        if norm > 1e-3 && norm <= 1.0 {
            return center + (radius / norm) * offset;
        }
    }
}

/// A random interpolation set of the requested cardinality whose points lie
/// in the radius ball around a random center, redrawn until the
/// interpolation system factorizes.
pub fn random_poised_set(
    rng: &mut ChaCha8Rng,
    d: usize,
    cardinality: usize,
    radius: f64,
) -> InterpolationSet {
    loop {
        let center = DVector::from_fn(d, |_, _| rng.random_range(-1.0..=1.0));
        let mut points = vec![center.clone()];
        for _ in 1..cardinality {
            points.push(random_point_in_ball(rng, &center, radius));
        }
        let set = InterpolationSet::from_points(points);
        if KktSystem::assemble(&set).is_ok() {
            return set;
        }
    }
}

/// A quadratic in absolute coordinates, used as ground truth for recovery
/// tests.
pub struct Quadratic {
    pub constant: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

impl Quadratic {
    pub fn random(rng: &mut ChaCha8Rng, d: usize) -> Self {
        let raw = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..=1.0));
        let hessian = &raw + raw.transpose();
        Quadratic {
            constant: rng.random_range(-1.0..=1.0),
            gradient: DVector::from_fn(d, |_, _| rng.random_range(-1.0..=1.0)),
            hessian,
        }
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.constant + self.gradient.dot(x) + 0.5 * (&self.hessian * x).dot(x)
    }

    pub fn gradient_at(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.gradient + &self.hessian * x
    }
}

/// Values of a ground-truth quadratic at every point of a set.
pub fn values_of(set: &InterpolationSet, quadratic: &Quadratic) -> DVector<f64> {
    DVector::from_iterator(set.len(), set.points().iter().map(|x| quadratic.value(x)))
}

/// Number of distinct quadratic monomials in dimension `d`.
pub fn quadratic_monomials(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Quadratic monomial vector of a displacement: squares first, then cross
/// terms ordered by the smaller index.
fn monomials(s: &DVector<f64>) -> DVector<f64> {
    let d = s.len();
    let mut entries = Vec::with_capacity(quadratic_monomials(d));
    for i in 0..d {
        entries.push(s[i] * s[i]);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            entries.push(s[i] * s[j]);
        }
    }
    DVector::from_vec(entries)
}

/// Least-norm interpolating quadratic computed by explicit projection: with
/// affine columns `A` and quadratic columns `B`, the quadratic coefficients
/// are the minimum-norm solution of the interpolation conditions restricted
/// to the complement of `A`'s column space,
/// `beta = pinv((I - A pinv(A)) B) (I - A pinv(A)) y`, and the affine
/// coefficients then solve `A alpha = y - B beta` in least squares.
///
/// Returns `(alpha, beta)` with `alpha = [constant, slope...]` and `beta`
/// ordered as in [`monomials`], all in raw displacement coordinates.
/// Pseudo-inverse built from the symmetric eigendecomposition of the Gram
/// matrix, treating singular values below `rel_tol` times the largest one as
/// zero.
///
/// nalgebra's SVD can return inaccurate singular vectors for rank-deficient
/// rectangular inputs, which quietly corrupts `pseudo_inverse`. The Gram
/// route only ever factorizes a square symmetric matrix, which the
/// eigensolver handles reliably, at the cost of squaring the condition
/// number; callers should reserve it for rank-deficient systems.
pub fn stable_pseudo_inverse(matrix: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    if matrix.nrows() < matrix.ncols() {
        return stable_pseudo_inverse(&matrix.transpose(), rel_tol).transpose();
    }
    let eig = SymmetricEigen::new(matrix.transpose() * matrix);
    let floor = eig.eigenvalues.max() * rel_tol * rel_tol;
    let inverted = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues
            .iter()
            .map(|&value| if value > floor { 1.0 / value } else { 0.0 }),
    );
    &eig.eigenvectors
        * DMatrix::from_diagonal(&inverted)
        * eig.eigenvectors.transpose()
        * matrix.transpose()
}

pub fn least_norm_quadratic(
    set: &InterpolationSet,
    values: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let d = set.dimension();
    let p1 = set.len();
    let q = quadratic_monomials(d);
    let center = set.center();

    let mut a = DMatrix::zeros(p1, d + 1);
    let mut b = DMatrix::zeros(p1, q);
    for (row, point) in set.points().iter().enumerate() {
        let s = point - center;
        a[(row, 0)] = 1.0;
        for col in 0..d {
            a[(row, col + 1)] = s[col];
        }
        b.row_mut(row).copy_from(&monomials(&s).transpose());
    }

    let a_pinv = a
        .clone()
        .svd(true, true)
        .pseudo_inverse(1e-12)
        .expect("pseudo-inverse of the affine block exists");
    let projector = DMatrix::identity(p1, p1) - &a * &a_pinv;
    let projected_b = &projector * &b;
    let projected_y = &projector * values;
    let beta = stable_pseudo_inverse(&projected_b, 1e-6) * projected_y;
    let alpha = &a_pinv * (values - &b * &beta);
    (alpha, beta)
}

/// Hessian encoded by a [`monomials`]-ordered coefficient vector: diagonal
/// entries twice the square coefficients, off-diagonal entries the cross
/// coefficients.
pub fn hessian_of_coefficients(d: usize, beta: &DVector<f64>) -> DMatrix<f64> {
    let mut hessian = DMatrix::zeros(d, d);
    for i in 0..d {
        hessian[(i, i)] = 2.0 * beta[i];
    }
    let mut k = d;
    for i in 0..d {
        for j in (i + 1)..d {
            hessian[(i, j)] = beta[k];
            hessian[(j, i)] = beta[k];
            k += 1;
        }
    }
    hessian
}

/// Monomial coefficient vector of a symmetric matrix, inverse of
/// [`hessian_of_coefficients`].
pub fn coefficients_of_hessian(hessian: &DMatrix<f64>) -> DVector<f64> {
    let d = hessian.nrows();
    let mut entries = Vec::with_capacity(quadratic_monomials(d));
    for i in 0..d {
        entries.push(hessian[(i, i)] / 2.0);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            entries.push(hessian[(i, j)]);
        }
    }
    DVector::from_vec(entries)
}

/// Largest sampled absolute value of a quadratic over a ball: random
/// interior and boundary points plus the center. A lower bound on the true
/// maximum, so it must never exceed an exact maximizer's report.
pub fn sampled_ball_max_abs(
    rng: &mut ChaCha8Rng,
    poly: &QuadraticModel,
    center: &DVector<f64>,
    radius: f64,
    samples: usize,
) -> f64 {
    let mut best = poly.evaluate(center).abs();
    for _ in 0..samples {
        let interior = random_point_in_ball(rng, center, radius);
        best = best.max(poly.evaluate(&interior).abs());
        let boundary = random_point_on_sphere(rng, center, radius);
        best = best.max(poly.evaluate(&boundary).abs());
    }
    best
}

/// Cut value of one assignment, counting edges whose endpoints fall on
/// opposite sides of the bitmask.
pub fn cut_of_assignment(edges: &[(usize, usize)], assignment: u32) -> u32 {
    edges
        .iter()
        .filter(|(u, v)| (assignment >> u) & 1 != (assignment >> v) & 1)
        .count() as u32
}

/// Exhaustive MaxCut over all assignments.
pub fn brute_force_max_cut(n: usize, edges: &[(usize, usize)]) -> u32 {
    (0u32..1 << n)
        .map(|assignment| cut_of_assignment(edges, assignment))
        .max()
        .expect("at least the empty assignment exists")
}

/// Reference circuit expectation by dense linear algebra: the phase layer is
/// a diagonal matrix over basis states and the mixer is an explicit
/// Kronecker product of single-qubit rotations. Intended for small qubit
/// counts only.
pub fn dense_qaoa_expectation(n: usize, edges: &[(usize, usize)], params: &[f64]) -> f64 {
    assert!(params.len() % 2 == 0, "parameters come in layer pairs");
    let dim = 1usize << n;
    let cuts: Vec<f64> =
        (0..dim).map(|z| f64::from(cut_of_assignment(edges, z as u32))).collect();

    let amplitude = Complex64::new(1.0 / (dim as f64).sqrt(), 0.0);
    let mut state = DVector::from_element(dim, amplitude);

    for layer in params.chunks_exact(2) {
        let (gamma, beta) = (layer[0], layer[1]);
        for z in 0..dim {
            state[z] *= Complex64::from_polar(1.0, -gamma * cuts[z]);
        }
        let rotation = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(beta.cos(), 0.0),
                Complex64::new(0.0, -beta.sin()),
                Complex64::new(0.0, -beta.sin()),
                Complex64::new(beta.cos(), 0.0),
            ],
        );
        let mut mixer = DMatrix::identity(1, 1);
        for _ in 0..n {
            mixer = mixer.kronecker(&rotation);
        }
        state = mixer * state;
    }

    (0..dim).map(|z| state[z].norm_sqr() * cuts[z]).sum()
}

/// Sample lag-1 autocorrelation, for whiteness checks on noise streams.
pub fn lag1_autocorrelation(samples: &[f64]) -> f64 {
    assert!(samples.len() >= 3, "autocorrelation needs several samples");
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let numerator: f64 =
        (0..n - 1).map(|t| (samples[t] - mean) * (samples[t + 1] - mean)).sum();
    let denominator: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
    numerator / denominator
}
