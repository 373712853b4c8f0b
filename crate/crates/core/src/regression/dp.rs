//! The functional mechanism for least squares over rows in [-1, 1].
//!
//! The objective Σ(y − xᵀη)² is a quadratic in η whose coefficients are the
//! entries of O = XᵀX and V = XᵀY. Laplace noise goes on those entries, and
//! the noisy quadratic is minimized.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::ols::solve_ols_with;
use super::RegressionError;

/// Smallest eigenvalue allowed in the perturbed O.
pub const PD_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    epsilon: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64) -> Result<Self, RegressionError> {
        if epsilon > 0.0 && epsilon.is_finite() {
            Ok(PrivacyBudget { epsilon })
        } else {
            Err(RegressionError::Budget(epsilon))
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// L1 sensitivity of the stacked (O, V) entries for design width `d`.
///
/// Replacing one row changes each entry of x xᵀ and x·y by at most 2, so the
/// change is at most 2d² + 2d, below 2(d + 1)².
pub fn sensitivity(d: usize) -> f64 {
    let d1 = (d + 1) as f64;
    2.0 * d1 * d1
}

fn row_terms(x: &[f64], y: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len() * (x.len() + 1));
    for a in x {
        for b in x {
            out.push(a * b);
        }
    }
    out.extend(x.iter().map(|a| a * y));
    out
}

/// Largest L1 change of the stacked (O, V) entries when one row with every
/// coordinate (and y) on `levels` is replaced by another. Exhaustive, so keep
/// `d` small.
pub fn sensitivity_oracle(d: usize, levels: &[f64]) -> f64 {
    let k = levels.len();
    let points: Vec<Vec<f64>> = (0..k.pow(d as u32 + 1))
        .map(|mut code| {
            (0..=d)
                .map(|_| {
                    let v = levels[code % k];
                    code /= k;
                    v
                })
                .collect()
        })
        .collect();
    let terms: Vec<Vec<f64>> = points.iter().map(|p| row_terms(&p[..d], p[d])).collect();
    let mut best = 0.0f64;
    for a in &terms {
        for b in &terms {
            let l1: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
            best = best.max(l1);
        }
    }
    best
}

/// Laplace(0, b) as the difference of two unit exponentials.
pub fn laplace<R: Rng + ?Sized>(b: f64, rng: &mut R) -> f64 {
    let e1: f64 = Exp1.sample(rng);
    let e2: f64 = Exp1.sample(rng);
    b * (e1 - e2)
}

/// Symmetrizes `o` and lifts every eigenvalue to at least `floor`.
pub fn project_pd(o: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let sym = (o + o.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let lifted = eig.eigenvalues.map(|l| l.max(floor));
    &eig.eigenvectors * DMatrix::from_diagonal(&lifted) * eig.eigenvectors.transpose()
}

fn check_normalized(o: &DMatrix<f64>, v: &DVector<f64>, n: u64) -> Result<(), RegressionError> {
    let cap = n as f64 * (1.0 + 1e-9) + 1e-9;
    if let Some(x) = o.iter().chain(v.iter()).find(|x| !(x.abs() <= cap)) {
        return Err(RegressionError::Normalization(format!(
            "entry {x} exceeds the row count {n}"
        )));
    }
    if let Some(x) = o.diagonal().iter().find(|x| **x < -1e-9) {
        return Err(RegressionError::Normalization(format!(
            "negative diagonal entry {x}"
        )));
    }
    Ok(())
}

/// Perturbs the upper triangle of O (mirrored) and every entry of V with
/// independent Laplace(Δ/ε) noise, projects O to positive definite and
/// solves. `n` is the number of rows behind the statistics.
pub fn functional_mechanism<R: Rng + ?Sized>(
    o: &DMatrix<f64>,
    v: &DVector<f64>,
    n: u64,
    budget: PrivacyBudget,
    rng: &mut R,
) -> Result<DVector<f64>, RegressionError> {
    let d = o.nrows();
    if o.ncols() != d || v.len() != d {
        return Err(RegressionError::DimMismatch(d, v.len()));
    }
    check_normalized(o, v, n)?;
    let b = sensitivity(d) / budget.epsilon();
    let mut noisy = o.clone();
    for j in 0..d {
        for i in 0..=j {
            let z = laplace(b, rng);
            noisy[(i, j)] += z;
            if i != j {
                noisy[(j, i)] += z;
            }
        }
    }
    let noisy_v = v.map(|x| x + laplace(b, rng));
    let pd = project_pd(&noisy, PD_FLOOR);
    solve_ols_with(&pd, &noisy_v, f64::INFINITY)
}
