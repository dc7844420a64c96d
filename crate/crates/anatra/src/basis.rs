//! Monomial basis for quadratic interpolation models.
//!
//! Every quadratic polynomial on `R^d` is written as `alpha' * mu(x) +
//! beta' * nu(x)`, where `mu` collects the degree-zero and degree-one
//! monomials and `nu` the degree-two monomials. The ordering is fixed so
//! that assembled interpolation matrices are reproducible:
//!
//! * `mu(x) = [1, x_1, ..., x_d]`, length `d + 1`;
//! * `nu(x) = [x_1^2, ..., x_d^2, x_1 x_2, x_1 x_3, ..., x_{d-1} x_d]`,
//!   squares first, then cross terms with `i < j` in lexicographic order,
//!   length `d (d + 1) / 2`.

use nalgebra::{DMatrix, DVector};

/// Number of degree-zero and degree-one monomials in dimension `d`.
pub fn linear_len(d: usize) -> usize {
    d + 1
}

/// Number of degree-two monomials in dimension `d`.
pub fn quadratic_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Evaluates the degree-zero and degree-one monomials `[1, x_1, ..., x_d]`.
pub fn linear_basis(x: &DVector<f64>) -> DVector<f64> {
    let d = x.len();
    let mut out = DVector::zeros(d + 1);
    out[0] = 1.0;
    out.rows_mut(1, d).copy_from(x);
    out
}

/// Evaluates the degree-two monomials: all squares `x_i^2` in coordinate
/// order, then all cross terms `x_i x_j` with `i < j` in lexicographic order.
pub fn quadratic_basis(x: &DVector<f64>) -> DVector<f64> {
    let d = x.len();
    let mut out = DVector::zeros(quadratic_len(d));
    for i in 0..d {
        out[i] = x[i] * x[i];
    }
    let mut idx = d;
    for i in 0..d {
        for j in (i + 1)..d {
            out[idx] = x[i] * x[j];
            idx += 1;
        }
    }
    out
}

/// Expands degree-two coefficients into the symmetric Hessian of the model
/// `m(s) = c + g's + s'Hs/2`: the square coefficient `beta_i` contributes
/// `H_ii = 2 beta_i` and the cross coefficient of `x_i x_j` contributes
/// `H_ij = H_ji = beta_ij`.
pub fn hessian_from_coefficients(beta: &DVector<f64>, d: usize) -> DMatrix<f64> {
    assert_eq!(beta.len(), quadratic_len(d), "coefficient block size mismatch");
    let mut h = DMatrix::zeros(d, d);
    for i in 0..d {
        h[(i, i)] = 2.0 * beta[i];
    }
    let mut idx = d;
    for i in 0..d {
        for j in (i + 1)..d {
            h[(i, j)] = beta[idx];
            h[(j, i)] = beta[idx];
            idx += 1;
        }
    }
    h
}

/// Collapses a symmetric Hessian back into the degree-two coefficient block,
/// inverting [`hessian_from_coefficients`].
pub fn coefficients_from_hessian(h: &DMatrix<f64>) -> DVector<f64> {
    let d = h.nrows();
    assert_eq!(h.ncols(), d, "hessian must be square");
    let mut beta = DVector::zeros(quadratic_len(d));
    for i in 0..d {
        beta[i] = 0.5 * h[(i, i)];
    }
    let mut idx = d;
    for i in 0..d {
        for j in (i + 1)..d {
            beta[idx] = 0.5 * (h[(i, j)] + h[(j, i)]);
            idx += 1;
        }
    }
    beta
}
