//! The nonnegative factor `X` and its recursively maintained Gram cache.

use serde::Serialize;

use crate::error::{Error, Result};

/// Row-major `n x r` nonnegative matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorMatrix {
    n: usize,
    r: usize,
    data: Vec<f64>,
}

impl FactorMatrix {
    pub fn zeros(n: usize, r: usize) -> Self {
        Self {
            n,
            r,
            data: vec![0.0; n * r],
        }
    }

    /// Fails if any entry is negative or not finite.
    pub fn from_row_major(n: usize, r: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * r {
            return Err(Error::Dimension(format!(
                "factor storage has {} entries, expected {n} x {r}",
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidFactorEntry {
                row: k / r,
                col: k % r,
                value: data[k],
            });
        }
        Ok(Self { n, r, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.r + j]
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(v >= 0.0 && v.is_finite());
        self.data[i * self.r + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.r..(i + 1) * self.r]
    }

    #[inline]
    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.r..(i + 1) * self.r]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn scale(&mut self, s: f64) {
        assert!(s >= 0.0 && s.is_finite());
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// `X^T X`, row-major `r x r`.
    pub fn gram(&self) -> Vec<f64> {
        let r = self.r;
        let mut g = vec![0.0; r * r];
        for i in 0..self.n {
            let row = self.row(i);
            for a in 0..r {
                let xa = row[a];
                if xa == 0.0 {
                    continue;
                }
                for b in 0..r {
                    g[a * r + b] += xa * row[b];
                }
            }
        }
        g
    }

    /// Diagonal of `X X^T`, i.e. squared row norms.
    pub fn row_norms_sq(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|v| v * v).sum())
            .collect()
    }
}

/// `X^T X` and `diag(X X^T)`, updated in `O(r)` per entry change and `O(r^2)` per row change.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GramCache {
    r: usize,
    gram: Vec<f64>,
    diag_xxt: Vec<f64>,
}

impl GramCache {
    pub fn from_factor(x: &FactorMatrix) -> Self {
        Self {
            r: x.r(),
            gram: x.gram(),
            diag_xxt: x.row_norms_sq(),
        }
    }

    /// Recomputes both parts from scratch.
    pub fn refresh(&mut self, x: &FactorMatrix) {
        *self = Self::from_factor(x);
    }

    pub fn r(&self) -> usize {
        self.r
    }

    #[inline]
    pub fn gram(&self, a: usize, b: usize) -> f64 {
        self.gram[a * self.r + b]
    }

    pub fn gram_slice(&self) -> &[f64] {
        &self.gram
    }

    #[inline]
    pub fn gram_row(&self, a: usize) -> &[f64] {
        &self.gram[a * self.r..(a + 1) * self.r]
    }

    #[inline]
    pub fn diag_xxt(&self, i: usize) -> f64 {
        self.diag_xxt[i]
    }

    pub fn diag_xxt_slice(&self) -> &[f64] {
        &self.diag_xxt
    }

    /// Entry `(i, j)` of `X` changes from `old_row[j]` to `x_new`.
    ///
    /// Row and column `j` of the Gram matrix both move by `delta * old_row`,
    /// so the `(j, j)` entry moves by `2 delta x_old + delta^2`.
    pub fn update_for_entry(&mut self, old_row: &[f64], i: usize, j: usize, x_new: f64) {
        let r = self.r;
        assert!(old_row.len() == r && j < r, "entry update out of range");
        assert!(i < self.diag_xxt.len(), "row index out of range");
        let x_old = old_row[j];
        let delta = x_new - x_old;
        if delta == 0.0 {
            return;
        }
        for (k, &v) in old_row.iter().enumerate() {
            if k != j {
                let s = delta * v;
                self.gram[j * r + k] += s;
                self.gram[k * r + j] += s;
            }
        }
        self.gram[j * r + j] += 2.0 * delta * x_old + delta * delta;
        let d = &mut self.diag_xxt[i];
        *d += 2.0 * delta * x_old + delta * delta;
        if *d < 0.0 {
            *d = 0.0;
        }
    }

    /// Row `i` of `X` changes from `old_row` to `new_row`.
    pub fn update_for_row(&mut self, old_row: &[f64], new_row: &[f64], i: usize) {
        let r = self.r;
        assert!(
            old_row.len() == r && new_row.len() == r,
            "row update dimension mismatch"
        );
        assert!(i < self.diag_xxt.len(), "row index out of range");
        for a in 0..r {
            let (oa, na) = (old_row[a], new_row[a]);
            for b in 0..r {
                self.gram[a * r + b] += na * new_row[b] - oa * old_row[b];
            }
        }
        self.diag_xxt[i] = new_row.iter().map(|v| v * v).sum();
    }

    /// Largest absolute entrywise deviation from a from-scratch recomputation,
    /// scaled by `max(1, max |entry|)` of the recomputed parts.
    pub fn drift(&self, x: &FactorMatrix) -> f64 {
        let fresh = Self::from_factor(x);
        let rel = |a: &[f64], b: &[f64]| {
            let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            a.iter()
                .zip(b)
                .map(|(u, v)| (u - v).abs())
                .fold(0.0f64, f64::max)
                / scale
        };
        rel(&self.gram, &fresh.gram).max(rel(&self.diag_xxt, &fresh.diag_xxt))
    }
}
