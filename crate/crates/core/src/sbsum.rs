//! Scalar-wise BSUM: every entry `X_ij` is a block, updated by minimizing a
//! convex quartic upper bound of the exact one-dimensional objective.
//!
//! Writing `e = x - X_ij`, the objective along entry `(i, j)` is
//! `F(X) = F(X~) + g(x)` with
//! `g(x) = a/4 e^4 + b/3 e^3 + c/2 e^2 + d e` and
//!
//! * `a = 4`
//! * `b = 12 X_ij`
//! * `c = 4 ((XX^T)_ii - M_ii + (X^TX)_jj + X_ij^2)`
//! * `d = 4 (X_{i:} (X^TX)_{:j} - M_{i:} X_{:j})`
//!
//! The surrogate adds `max(b^2/(3a) - c, 0) e^2 / 2`, which makes it convex
//! with a unique minimizer over `x >= 0`.

use crate::cubic::{solve_entry_surrogate, CubicCoefficients};
use crate::error::{Error, Result};
use crate::factor::{FactorMatrix, GramCache};
use crate::matrix::SimilarityMatrix;

/// Coefficients of the one-dimensional problem for entry `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntryUpdateContext {
    pub i: usize,
    pub j: usize,
    /// Current value of `X_ij`.
    pub x_cur: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl EntryUpdateContext {
    pub const A: f64 = 4.0;

    pub fn coefficients(&self) -> CubicCoefficients {
        CubicCoefficients::new(Self::A, self.b, self.c, self.d)
    }

    /// Coefficients actually handed to the solver: `c` raised to `b^2/(3a)`.
    pub fn surrogate_coefficients(&self) -> CubicCoefficients {
        let floor = self.b * self.b / (3.0 * Self::A);
        CubicCoefficients::new(Self::A, self.b, self.c.max(floor), self.d)
    }

    /// `g(x) = F(X~ + (x - X_ij) E_ij) - F(X~)`.
    pub fn quartic(&self, x: f64) -> f64 {
        let e = x - self.x_cur;
        let e2 = e * e;
        Self::A / 4.0 * e2 * e2 + self.b / 3.0 * e2 * e + self.c / 2.0 * e2 + self.d * e
    }

    /// The convex upper bound `g~(x)`.
    pub fn surrogate(&self, x: f64) -> f64 {
        let e = x - self.x_cur;
        self.quartic(x) + 0.5 * self.coefficients().curvature_lift() * e * e
    }

    /// `g~'(x)`.
    pub fn surrogate_derivative(&self, x: f64) -> f64 {
        let e = x - self.x_cur;
        let c = self.c + self.coefficients().curvature_lift();
        Self::A * e * e * e + self.b * e * e + c * e + self.d
    }

    /// `g'(x)`.
    pub fn quartic_derivative(&self, x: f64) -> f64 {
        let e = x - self.x_cur;
        Self::A * e * e * e + self.b * e * e + self.c * e + self.d
    }
}

/// Builds `(b, c, d)` for entry `(i, j)` from the cached Gram data.
pub fn compute_entry_coefficients(
    m: &SimilarityMatrix,
    x: &FactorMatrix,
    cache: &GramCache,
    i: usize,
    j: usize,
) -> EntryUpdateContext {
    let r = x.r();
    let xij = x.get(i, j);
    let row = x.row(i);
    let b = 12.0 * xij;
    let c = 4.0 * (cache.diag_xxt(i) - m.diag(i) + cache.gram(j, j) + xij * xij);
    // gram is symmetric, so its row j is column j
    let x_gram: f64 = row.iter().zip(cache.gram_row(j)).map(|(u, v)| u * v).sum();
    let mx = m.row_dot_strided(i, x.as_slice(), r, j);
    let d = 4.0 * (x_gram - mx);
    EntryUpdateContext {
        i,
        j,
        x_cur: xij,
        b,
        c,
        d,
    }
}

/// Surrogate minimizer for entry `(i, j)` without modifying anything.
pub fn propose_entry(
    m: &SimilarityMatrix,
    x: &FactorMatrix,
    cache: &GramCache,
    i: usize,
    j: usize,
) -> Result<f64> {
    let ctx = compute_entry_coefficients(m, x, cache, i, j);
    solve_entry_surrogate(ctx.surrogate_coefficients())
}

/// Replaces `X_ij` by the surrogate minimizer and updates the cache.
/// Returns the new value.
pub fn update_entry(
    m: &SimilarityMatrix,
    x: &mut FactorMatrix,
    cache: &mut GramCache,
    i: usize,
    j: usize,
) -> Result<f64> {
    let x_new = propose_entry(m, x, cache, i, j)?;
    cache.update_for_entry(x.row(i), i, j, x_new);
    x.set(i, j, x_new);
    Ok(x_new)
}

/// Checks that `order` visits every index in `0..m` exactly once.
pub(crate) fn check_permutation(order: &[usize], m: usize) -> Result<()> {
    if order.len() != m {
        return Err(Error::NotAPermutation {
            expected: m,
            reason: format!("length {}", order.len()),
        });
    }
    let mut seen = vec![false; m];
    for &k in order {
        if k >= m {
            return Err(Error::NotAPermutation {
                expected: m,
                reason: format!("index {k} out of range"),
            });
        }
        if std::mem::replace(&mut seen[k], true) {
            return Err(Error::NotAPermutation {
                expected: m,
                reason: format!("index {k} repeated"),
            });
        }
    }
    Ok(())
}

/// One pass over all `n r` entries. Block `k` is entry `(k / r, k % r)`,
/// so the identity order is row-major cyclic.
pub fn sweep_sbsum(
    m: &SimilarityMatrix,
    x: &mut FactorMatrix,
    cache: &mut GramCache,
    order: &[usize],
) -> Result<()> {
    let r = x.r();
    check_permutation(order, x.n() * r)?;
    for &k in order {
        update_entry(m, x, cache, k / r, k % r)?;
    }
    Ok(())
}
