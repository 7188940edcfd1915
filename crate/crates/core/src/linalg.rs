use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Cholesky factor of a symmetric positive-definite matrix. When the plain
/// factorization fails, one retry is made with `1e-10 · trace / dim` added to
/// the diagonal.
pub(crate) fn spd_factor(matrix: &DMatrix<f64>, what: &'static str) -> Result<Cholesky<f64, Dyn>> {
    if let Some(chol) = Cholesky::new(matrix.clone()) {
        return Ok(chol);
    }
    let dim = matrix.nrows().max(1) as f64;
    let jitter = 1e-10 * matrix.trace().abs() / dim;
    let mut bumped = matrix.clone();
    for i in 0..bumped.nrows() {
        bumped[(i, i)] += jitter;
    }
    Cholesky::new(bumped).ok_or(Error::Singular(what))
}

pub(crate) fn spd_solve(matrix: &DMatrix<f64>, rhs: &DVector<f64>, what: &'static str) -> Result<DVector<f64>> {
    Ok(spd_factor(matrix, what)?.solve(rhs))
}

/// `Aᵀ diag(weights) A`.
pub(crate) fn weighted_gram(a: &DMatrix<f64>, weights: &DVector<f64>) -> DMatrix<f64> {
    let p = a.ncols();
    let mut out = DMatrix::zeros(p, p);
    for (t, &w) in weights.iter().enumerate() {
        let row = a.row(t);
        for i in 0..p {
            let ri = w * row[i];
            for j in 0..=i {
                out[(i, j)] += ri * row[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            out[(j, i)] = out[(i, j)];
        }
    }
    out
}

/// `Aᵀ diag(weights) B` for conformable `A`, `B`.
pub(crate) fn weighted_cross(a: &DMatrix<f64>, weights: &DVector<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.ncols(), b.ncols());
    for (t, &w) in weights.iter().enumerate() {
        for i in 0..a.ncols() {
            let ai = w * a[(t, i)];
            for j in 0..b.ncols() {
                out[(i, j)] += ai * b[(t, j)];
            }
        }
    }
    out
}

/// Ordinary least squares coefficients of `y` on `a`.
pub(crate) fn least_squares(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let ones = DVector::from_element(a.nrows(), 1.0);
    let gram = weighted_gram(a, &ones);
    spd_solve(&gram, &(a.transpose() * y), "least squares normal matrix")
}
