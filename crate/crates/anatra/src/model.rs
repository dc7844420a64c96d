//! Minimum Frobenius norm quadratic interpolation models.
//!
//! Given a centered point set and noisy function values, the model is the
//! quadratic interpolant whose degree-two coefficient block has least norm.
//! It is found by solving the saddle-point system
//!
//! ```text
//! [ N'N  M' ] [ lambda ]   [ values ]
//! [ M    0  ] [ alpha  ] = [ 0      ]
//! ```
//!
//! with `beta = N lambda`, where `M` and `N` hold the linear and quadratic
//! monomials of each point's displacement from the center. Lagrange
//! polynomials come from the same matrix with indicator right-hand sides.
//! All polynomials are expressed in displacement coordinates about the
//! set's center as `m(s) = c + g's + s'Hs/2`.

use crate::basis::{
    hessian_from_coefficients, linear_basis, linear_len, quadratic_basis, quadratic_len,
};
use crate::error::Error;
use crate::set::InterpolationSet;
use nalgebra::{DMatrix, DVector, Dyn, SVD};

/// Condition-estimate threshold above which the saddle-point system is
/// declared singular and the caller must rebuild the set geometry.
pub const CONDITION_LIMIT: f64 = 1e12;

/// A quadratic polynomial `m(x) = c + g'(x - x0) + (x - x0)'H(x - x0)/2`
/// stored in displacement coordinates about a base point `x0`.
#[derive(Debug, Clone)]
pub struct QuadraticModel {
    center: DVector<f64>,
    constant: f64,
    gradient: DVector<f64>,
    hessian: DMatrix<f64>,
}

impl QuadraticModel {
    /// Builds a model directly from its coefficients.
    pub fn from_parts(
        center: DVector<f64>,
        constant: f64,
        gradient: DVector<f64>,
        hessian: DMatrix<f64>,
    ) -> Self {
        assert_eq!(center.len(), gradient.len(), "coefficient dimensions disagree");
        assert_eq!(hessian.nrows(), center.len(), "hessian dimension mismatch");
        assert_eq!(hessian.ncols(), center.len(), "hessian dimension mismatch");
        Self { center, constant, gradient, hessian }
    }

    /// The base point the displacements are measured from.
    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    /// Model value at the center, `m(x0)`.
    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// Model gradient at the center.
    pub fn gradient(&self) -> &DVector<f64> {
        &self.gradient
    }

    /// Symmetric model Hessian.
    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    /// Evaluates the model at a displacement `s` from the center.
    pub fn evaluate_displacement(&self, s: &DVector<f64>) -> f64 {
        self.constant + self.gradient.dot(s) + 0.5 * (&self.hessian * s).dot(s)
    }

    /// Evaluates the model at an absolute point `x`.
    pub fn evaluate(&self, x: &DVector<f64>) -> f64 {
        self.evaluate_displacement(&(x - &self.center))
    }

    /// Model gradient at an absolute point `x`: `g + H (x - x0)`.
    pub fn gradient_at(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.gradient + &self.hessian * (x - &self.center)
    }

    /// Spectral norm of the Hessian (largest eigenvalue magnitude).
    pub fn hessian_norm(&self) -> f64 {
        let sym = nalgebra::SymmetricEigen::new(self.hessian.clone());
        sym.eigenvalues.iter().fold(0.0, |acc: f64, &e| acc.max(e.abs()))
    }
}

/// The Lagrange polynomials of an interpolation set: one quadratic per
/// point, with `l_i(x^j) = delta_ij` and coefficients of minimum norm.
#[derive(Debug, Clone)]
pub struct LagrangePolySet {
    polys: Vec<QuadraticModel>,
}

impl LagrangePolySet {
    /// Number of polynomials (equals the set cardinality).
    pub fn len(&self) -> usize {
        self.polys.len()
    }

    /// True when no polynomials are present. Never the case for sets built
    /// by [`lagrange_polynomials`].
    pub fn is_empty(&self) -> bool {
        self.polys.is_empty()
    }

    /// The polynomial associated with point `i`.
    pub fn poly(&self, i: usize) -> &QuadraticModel {
        &self.polys[i]
    }

    /// All polynomials in point order.
    pub fn polys(&self) -> &[QuadraticModel] {
        &self.polys
    }

    /// Evaluates `l_i` at an absolute point.
    pub fn evaluate(&self, i: usize, x: &DVector<f64>) -> f64 {
        self.polys[i].evaluate(x)
    }
}

/// The assembled saddle-point system of an interpolation set, holding the
/// monomial matrices and a factorization used to solve for model and
/// Lagrange coefficients.
///
/// The system is assembled on radius-normalized displacements `s / h` with
/// `h` the largest displacement norm. Every quadratic monomial scales by
/// the same factor `h^2`, so the least-norm coefficient problem has the
/// identical minimizer (and identical multipliers) as on raw displacements;
/// the normalization only keeps the condition estimate meaningful when the
/// sampling radius is small.
#[derive(Debug)]
pub struct KktSystem {
    n_matrix: DMatrix<f64>,
    svd: SVD<f64, Dyn, Dyn>,
    condition: f64,
    scale: f64,
    dimension: usize,
    cardinality: usize,
}

impl KktSystem {
    /// Assembles and factorizes the saddle-point matrix of `set`.
    ///
    /// # Panics
    ///
    /// Panics if the set cardinality is outside `[d + 1, (d+1)(d+2)/2]`.
    pub fn assemble(set: &InterpolationSet) -> Result<Self, Error> {
        let d = set.dimension();
        let p1 = set.len();
        assert!(
            p1 >= d + 1 && p1 <= (d + 1) * (d + 2) / 2,
            "model requested on a set of {p1} points in dimension {d}"
        );
        let displacements: Vec<DVector<f64>> =
            (0..p1).map(|j| set.point(j) - set.center()).collect();
        let scale = displacements.iter().map(|s| s.norm()).fold(0.0, f64::max);
        if scale == 0.0 || !scale.is_finite() {
            return Err(Error::SingularGeometry { condition: f64::INFINITY });
        }
        let ml = linear_len(d);
        let ql = quadratic_len(d);
        let mut m = DMatrix::zeros(ml, p1);
        let mut n = DMatrix::zeros(ql, p1);
        for (j, s) in displacements.iter().enumerate() {
            let u = s / scale;
            m.set_column(j, &linear_basis(&u));
            n.set_column(j, &quadratic_basis(&u));
        }
        let size = p1 + ml;
        let mut w = DMatrix::zeros(size, size);
        w.view_mut((0, 0), (p1, p1)).copy_from(&(n.transpose() * &n));
        w.view_mut((0, p1), (p1, ml)).copy_from(&m.transpose());
        w.view_mut((p1, 0), (ml, p1)).copy_from(&m);
        let svd = w.svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !condition.is_finite() || condition > CONDITION_LIMIT {
            return Err(Error::SingularGeometry { condition });
        }
        Ok(Self { n_matrix: n, svd, condition, scale, dimension: d, cardinality: p1 })
    }

    /// Condition estimate of the radius-normalized saddle-point matrix
    /// (ratio of extreme singular values).
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Solves the system for each column of `rhs` and converts each solution
    /// into a quadratic polynomial about `center`, undoing the radius
    /// normalization on the coefficients.
    fn polynomials_for(&self, center: &DVector<f64>, rhs: &DMatrix<f64>) -> Vec<QuadraticModel> {
        let p1 = self.cardinality;
        let ml = linear_len(self.dimension);
        let z = self
            .svd
            .solve(rhs, 0.0)
            .expect("singular values were computed during assembly");
        (0..rhs.ncols())
            .map(|i| {
                let lambda = z.view((0, i), (p1, 1)).clone_owned();
                let alpha = z.view((p1, i), (ml, 1)).clone_owned();
                let beta = &self.n_matrix * lambda;
                let gradient = alpha.view((1, 0), (self.dimension, 1)).clone_owned()
                    / self.scale;
                let hessian = hessian_from_coefficients(
                    &DVector::from_column_slice(beta.as_slice()),
                    self.dimension,
                ) / (self.scale * self.scale);
                QuadraticModel::from_parts(
                    center.clone(),
                    alpha[(0, 0)],
                    DVector::from_column_slice(gradient.as_slice()),
                    hessian,
                )
            })
            .collect()
    }
}

/// Builds the minimum Frobenius norm quadratic interpolating `values` on the
/// points of `set`, expressed in displacements about the set's center.
///
/// `values[i]` must be the (noisy) function value at `set.point(i)`.
///
/// # Errors
///
/// [`Error::SingularGeometry`] when the saddle-point system's condition
/// estimate exceeds [`CONDITION_LIMIT`]; the caller should rebuild the set
/// with [`affine_points`](crate::geometry::affine_points).
pub fn build_mfn_model(set: &InterpolationSet, values: &DVector<f64>) -> Result<QuadraticModel, Error> {
    assert_eq!(values.len(), set.len(), "one value per interpolation point");
    let kkt = KktSystem::assemble(set)?;
    let size = set.len() + linear_len(set.dimension());
    let mut rhs = DMatrix::zeros(size, 1);
    rhs.view_mut((0, 0), (set.len(), 1)).copy_from(values);
    let mut polys = kkt.polynomials_for(set.center(), &rhs);
    Ok(polys.pop().expect("one polynomial per right-hand side"))
}

/// Computes the Lagrange polynomials of `set` from indicator right-hand
/// sides on the shared saddle-point factorization.
///
/// # Errors
///
/// [`Error::SingularGeometry`] as for [`build_mfn_model`].
pub fn lagrange_polynomials(set: &InterpolationSet) -> Result<LagrangePolySet, Error> {
    let kkt = KktSystem::assemble(set)?;
    let p1 = set.len();
    let size = p1 + linear_len(set.dimension());
    let mut rhs = DMatrix::zeros(size, p1);
    rhs.view_mut((0, 0), (p1, p1)).fill_with_identity();
    Ok(LagrangePolySet { polys: kkt.polynomials_for(set.center(), &rhs) })
}
