//! Objective, gradient and stationarity measures for `F(X) = |M - X X^T|_F^2`.

use serde::Serialize;

use crate::factor::FactorMatrix;
use crate::matrix::SimilarityMatrix;

/// Per-iterate quality measures, all computed from one `M X` product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationarityReport {
    pub objective: f64,
    pub relative_residual_percent: f64,
    pub optimality_gap: f64,
    /// `y^T (grad^2 F)(y) y` at `y = vec(X)`.
    pub curvature_along_iterate: f64,
}

fn frob_sq(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

/// `F(X)` through `|M|^2 - 2 tr(X^T M X) + |X^T X|^2`, given `M X`.
fn objective_from_parts(m_norm_sq: f64, x: &[f64], mx: &[f64], gram: &[f64]) -> f64 {
    let cross: f64 = x.iter().zip(mx).map(|(a, b)| a * b).sum();
    (m_norm_sq - 2.0 * cross + frob_sq(gram)).max(0.0)
}

/// `4 (X (X^T X) - M X)`, row-major `n x r`.
fn gradient_from_parts(x: &FactorMatrix, mx: &[f64], gram: &[f64]) -> Vec<f64> {
    let (n, r) = (x.n(), x.r());
    let mut g = vec![0.0; n * r];
    for i in 0..n {
        let row = x.row(i);
        for j in 0..r {
            let xg: f64 = (0..r).map(|k| row[k] * gram[k * r + j]).sum();
            g[i * r + j] = 4.0 * (xg - mx[i * r + j]);
        }
    }
    g
}

pub fn objective(m: &SimilarityMatrix, x: &FactorMatrix) -> f64 {
    let mx = m.mul_factor(x.as_slice(), x.r());
    objective_from_parts(m.frobenius_sq(), x.as_slice(), &mx, &x.gram())
}

/// `100 |M - X X^T|_F / |M|_F`.
pub fn relative_residual_percent(m: &SimilarityMatrix, objective: f64) -> f64 {
    let norm = m.frobenius_sq().sqrt();
    if norm == 0.0 {
        return if objective == 0.0 { 0.0 } else { f64::INFINITY };
    }
    100.0 * objective.sqrt() / norm
}

/// `grad F(X) = 4 (X X^T - M) X`, row-major `n x r`.
pub fn gradient(m: &SimilarityMatrix, x: &FactorMatrix) -> Vec<f64> {
    let mx = m.mul_factor(x.as_slice(), x.r());
    gradient_from_parts(x, &mx, &x.gram())
}

fn gap_from_gradient(x: &[f64], grad: &[f64]) -> f64 {
    x.iter()
        .zip(grad)
        .map(|(&v, &g)| (v - (v - g).max(0.0)).abs())
        .fold(0.0, f64::max)
}

/// `|X - [X - grad F(X)]_+|_inf`; zero exactly at stationary points.
pub fn optimality_gap(m: &SimilarityMatrix, x: &FactorMatrix) -> f64 {
    gap_from_gradient(x.as_slice(), &gradient(m, x))
}

/// `y^T (grad^2 F)(y) y` for `y = vec(X)`, as
/// `2 sum_ij (y^T (U_i^T U_j + U_j^T U_i) y)^2 + y^T grad F(y)`
/// where `y^T (U_i^T U_j + U_j^T U_i) y = 2 (X^T X)_ij`.
fn curvature_from_parts(x: &[f64], grad: &[f64], gram: &[f64]) -> f64 {
    let quartic: f64 = gram.iter().map(|g| 2.0 * (2.0 * g).powi(2)).sum();
    let linear: f64 = x.iter().zip(grad).map(|(a, b)| a * b).sum();
    quartic + linear
}

pub fn curvature_along_iterate(m: &SimilarityMatrix, x: &FactorMatrix) -> f64 {
    let mx = m.mul_factor(x.as_slice(), x.r());
    let gram = x.gram();
    let grad = gradient_from_parts(x, &mx, &gram);
    curvature_from_parts(x.as_slice(), &grad, &gram)
}

/// Lower bound the curvature must clear at a nonzero stationary point:
/// `8 sum_i |X_{:i}|^4`.
pub fn curvature_lower_bound(x: &FactorMatrix) -> f64 {
    let r = x.r();
    let gram = x.gram();
    8.0 * (0..r).map(|i| gram[i * r + i].powi(2)).sum::<f64>()
}

/// Computes every measure with a single `M X` product.
pub fn evaluate(m: &SimilarityMatrix, x: &FactorMatrix) -> StationarityReport {
    let mx = m.mul_factor(x.as_slice(), x.r());
    let gram = x.gram();
    let objective = objective_from_parts(m.frobenius_sq(), x.as_slice(), &mx, &gram);
    let grad = gradient_from_parts(x, &mx, &gram);
    StationarityReport {
        objective,
        relative_residual_percent: relative_residual_percent(m, objective),
        optimality_gap: gap_from_gradient(x.as_slice(), &grad),
        curvature_along_iterate: curvature_from_parts(x.as_slice(), &grad, &gram),
    }
}
