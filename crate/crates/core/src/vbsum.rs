//! Vector-wise BSUM: rows of `X` are the blocks.
//!
//! With the other rows fixed, the row subproblem is
//! `min_{x >= 0} phi(x) = |x|^4 + 2 x^T Q x - 4 q^T x` where
//! `Q = P - M_ii I`, `P = X^T X - x x^T` and `q = X^T M_{:i} - M_ii x`.
//! Each inner step majorizes the quadratic term with curvature `S` and
//! minimizes `|x|^4 + 2 S |x|^2 - 4 b^T x` in closed form: the direction
//! is `[b]_+` and the length solves `t^3 + S t - |[b]_+| = 0`.

use crate::cubic::solve_depressed_cubic;
use crate::error::Result;
use crate::factor::{FactorMatrix, GramCache};
use crate::matrix::{combine_rows, SimilarityMatrix};
use crate::sbsum::check_permutation;

/// Inner iterations per row visit unless configured otherwise.
pub const DEFAULT_I_MAX: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct RowSubproblem {
    pub i: usize,
    pub r: usize,
    /// Row-major `r x r`.
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub m_ii: f64,
    /// Curvature bound, `max(0, max_j (P 1)_j - M_ii)`.
    pub s: f64,
    /// Whether the zero clamp on `s` was active.
    pub clamped: bool,
}

impl RowSubproblem {
    fn p_times(&self, x: &[f64]) -> Vec<f64> {
        let r = self.r;
        (0..r)
            .map(|a| self.p[a * r..(a + 1) * r].iter().zip(x).map(|(u, v)| u * v).sum())
            .collect()
    }

    /// `x^T Q x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let px = self.p_times(x);
        dot(x, &px) - self.m_ii * dot(x, x)
    }

    /// `phi(x) = |x|^4 + 2 x^T Q x - 4 q^T x`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let n2 = dot(x, x);
        n2 * n2 + 2.0 * self.quad_form(x) - 4.0 * dot(&self.q, x)
    }

    /// `(S + M_ii) I - P`, so that `b = q + A y`.
    pub fn step_matrix(&self) -> Vec<f64> {
        let r = self.r;
        let mut a: Vec<f64> = self.p.iter().map(|v| -v).collect();
        for k in 0..r {
            a[k * r + k] += self.s + self.m_ii;
        }
        a
    }

    /// `b = q + (S + M_ii) y - P y`.
    pub fn linear_term(&self, y: &[f64]) -> Vec<f64> {
        let mut b = vec![0.0; self.r];
        linear_into(&self.step_matrix(), &self.q, y, &mut b);
        b
    }

    /// Upper bound of `phi` built at `y`, including its constant terms so that
    /// `surrogate(y, y) == objective(y)`.
    pub fn surrogate(&self, x: &[f64], y: &[f64]) -> f64 {
        let qy: Vec<f64> = {
            let py = self.p_times(y);
            py.iter().zip(y).map(|(p, v)| p - self.m_ii * v).collect()
        };
        let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let quad_bound = self.quad_form(y) + 2.0 * dot(&qy, &diff) + self.s * dot(&diff, &diff);
        let n2 = dot(x, x);
        n2 * n2 + 2.0 * quad_bound - 4.0 * dot(&self.q, x)
    }

    /// `grad phi(x) = 4 |x|^2 x + 4 Q x - 4 q`.
    pub fn objective_gradient(&self, x: &[f64]) -> Vec<f64> {
        let n2 = dot(x, x);
        let px = self.p_times(x);
        (0..self.r)
            .map(|a| 4.0 * n2 * x[a] + 4.0 * (px[a] - self.m_ii * x[a]) - 4.0 * self.q[a])
            .collect()
    }

    /// Gradient in `x` of the surrogate built at `y`: `4 |x|^2 x + 4 S x - 4 b`.
    pub fn surrogate_gradient(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let b = self.linear_term(y);
        let n2 = dot(x, x);
        (0..self.r)
            .map(|a| 4.0 * n2 * x[a] + 4.0 * self.s * x[a] - 4.0 * b[a])
            .collect()
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

pub fn build_row_subproblem(
    m: &SimilarityMatrix,
    x: &FactorMatrix,
    cache: &GramCache,
    i: usize,
) -> RowSubproblem {
    let r = x.r();
    let row = x.row(i);
    let mut p = cache.gram_slice().to_vec();
    for a in 0..r {
        for b in 0..r {
            p[a * r + b] -= row[a] * row[b];
        }
    }
    let m_ii = m.diag(i);
    let mut q = vec![0.0; r];
    m.row_times_factor(i, x.as_slice(), r, &mut q);
    for (qa, &xa) in q.iter_mut().zip(row) {
        *qa -= m_ii * xa;
    }
    let max_row_sum = (0..r)
        .map(|a| p[a * r..(a + 1) * r].iter().sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    let raw = max_row_sum - m_ii;
    RowSubproblem {
        i,
        r,
        p,
        q,
        m_ii,
        s: raw.max(0.0),
        clamped: raw < 0.0,
    }
}

/// `out = q + A y`, using the symmetry of `A` to combine its rows.
fn linear_into(a: &[f64], q: &[f64], y: &[f64], out: &mut [f64]) {
    out.copy_from_slice(q);
    combine_rows(y, a, q.len(), out);
}

/// Writes the step from `y` into `out`; `a` is the step matrix.
fn step_into(a: &[f64], q: &[f64], s: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
    linear_into(a, q, y, out);
    let mut norm_sq = 0.0;
    for v in out.iter_mut() {
        *v = v.max(0.0);
        norm_sq += *v * *v;
    }
    if norm_sq == 0.0 {
        return Ok(());
    }
    let norm = norm_sq.sqrt();
    let scale = solve_depressed_cubic(s, norm)? / norm;
    out.iter_mut().for_each(|v| *v *= scale);
    Ok(())
}

/// One majorization step from `x_cur`; returns the new row.
pub fn inner_step(sub: &RowSubproblem, x_cur: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; sub.r];
    step_into(&sub.step_matrix(), &sub.q, sub.s, x_cur, &mut out)?;
    Ok(out)
}

/// Result of `i_max` inner steps on row `i`, leaving `x` untouched.
pub fn propose_row(
    m: &SimilarityMatrix,
    x: &FactorMatrix,
    cache: &GramCache,
    i: usize,
    i_max: usize,
) -> Result<Vec<f64>> {
    assert!(i_max >= 1, "i_max must be positive");
    let sub = build_row_subproblem(m, x, cache, i);
    let a = sub.step_matrix();
    let mut cur = x.row(i).to_vec();
    let mut next = vec![0.0; sub.r];
    for _ in 0..i_max {
        step_into(&a, &sub.q, sub.s, &cur, &mut next)?;
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(cur)
}

/// Runs `i_max` inner steps on row `i` and writes the result back.
pub fn update_row(
    m: &SimilarityMatrix,
    x: &mut FactorMatrix,
    cache: &mut GramCache,
    i: usize,
    i_max: usize,
) -> Result<()> {
    let cur = propose_row(m, x, cache, i, i_max)?;
    cache.update_for_row(x.row(i), &cur, i);
    x.row_mut(i).copy_from_slice(&cur);
    Ok(())
}

/// One pass over all rows in `order`.
pub fn sweep_vbsum(
    m: &SimilarityMatrix,
    x: &mut FactorMatrix,
    cache: &mut GramCache,
    order: &[usize],
    i_max: usize,
) -> Result<()> {
    check_permutation(order, x.n())?;
    for &i in order {
        update_row(m, x, cache, i, i_max)?;
    }
    Ok(())
}
