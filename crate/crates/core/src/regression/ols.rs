//! Symmetric positive-definite solves of O·η = V.

use nalgebra::{DMatrix, DVector};

use super::RegressionError;

/// Default bound on the eigenvalue ratio of O.
pub const MAX_CONDITION: f64 = 1e12;

pub fn solve_ols(o: &DMatrix<f64>, v: &DVector<f64>) -> Result<DVector<f64>, RegressionError> {
    solve_ols_with(o, v, MAX_CONDITION)
}

fn condition(o: &DMatrix<f64>) -> f64 {
    let eig = o.clone().symmetric_eigen().eigenvalues;
    let max = eig.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn solve_ols_with(
    o: &DMatrix<f64>,
    v: &DVector<f64>,
    max_condition: f64,
) -> Result<DVector<f64>, RegressionError> {
    let m = o.nrows();
    if o.ncols() != m {
        return Err(RegressionError::DimMismatch(m, o.ncols()));
    }
    if v.len() != m {
        return Err(RegressionError::DimMismatch(m, v.len()));
    }
    let scale = o.abs().max().max(f64::MIN_POSITIVE);
    if (o - o.transpose()).abs().max() > 1e-9 * scale {
        return Err(RegressionError::SingularMatrix {
            condition: f64::NAN,
        });
    }
    let cond = condition(o);
    if !(cond <= max_condition) {
        return Err(RegressionError::SingularMatrix { condition: cond });
    }
    let chol = o
        .clone()
        .cholesky()
        .ok_or(RegressionError::SingularMatrix { condition: cond })?;
    let mut eta = chol.solve(v);
    // one step of iterative refinement
    let r = v - o * &eta;
    eta += chol.solve(&r);
    // normwise backward error
    let resid = (o * &eta - v).norm();
    let size = o.norm() * eta.norm() + v.norm();
    if !(resid <= 1e-8 * size.max(f64::MIN_POSITIVE)) {
        return Err(RegressionError::SingularMatrix { condition: cond });
    }
    Ok(eta)
}

/// Solves (O + λI)·η = V. Used when a member's own data leaves O singular,
/// for example when a categorical level never occurs locally.
pub fn solve_ridge(
    o: &DMatrix<f64>,
    v: &DVector<f64>,
    lambda: f64,
) -> Result<DVector<f64>, RegressionError> {
    let m = o.nrows();
    let reg = o + DMatrix::identity(m, m) * lambda;
    solve_ols_with(&reg, v, f64::INFINITY)
}
