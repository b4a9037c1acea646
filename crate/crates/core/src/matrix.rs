//! Symmetric similarity matrices with dense or CSR storage.
//!
//! All solver kernels access `M` by rows. Column access is never needed
//! because the matrix is symmetric, so `M_{:i}` is read as `M_{i:}`.

use log::warn;

use crate::error::{Error, Result};

/// Relative tolerance for the symmetry check.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Dense(Vec<f64>),
    Csr {
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    },
}

/// Symmetric `n x n` matrix, immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    storage: Storage,
    diag: Vec<f64>,
}

fn symmetric_pair_ok(a: f64, b: f64) -> bool {
    (a - b).abs() <= SYMMETRY_TOL * a.abs().max(1.0)
}

impl SimilarityMatrix {
    /// Dense row-major matrix. Fails on non-finite entries or asymmetry.
    pub fn dense(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Dimension(format!(
                "dense storage has {} entries, expected {}",
                data.len(),
                n * n
            )));
        }
        for i in 0..n {
            for j in 0..n {
                if !data[i * n + j].is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (u, l) = (data[i * n + j], data[j * n + i]);
                if !symmetric_pair_ok(u, l) {
                    return Err(Error::NotSymmetric {
                        row: i,
                        col: j,
                        upper: u,
                        lower: l,
                    });
                }
            }
        }
        Ok(Self::from_dense_unchecked(n, data))
    }

    /// Dense matrix replaced by `(M + M^T) / 2`, warning when `M` was not symmetric.
    pub fn dense_symmetrized(n: usize, mut data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Dimension(format!(
                "dense storage has {} entries, expected {}",
                data.len(),
                n * n
            )));
        }
        let mut asymmetric = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let (u, l) = (data[i * n + j], data[j * n + i]);
                if u != l {
                    asymmetric = true;
                    let avg = (u + l) / 2.0;
                    data[i * n + j] = avg;
                    data[j * n + i] = avg;
                }
            }
        }
        if asymmetric {
            warn!("input matrix is not symmetric; using (M + M^T) / 2");
        }
        Self::dense(n, data)
    }

    fn from_dense_unchecked(n: usize, data: Vec<f64>) -> Self {
        let diag = (0..n).map(|i| data[i * n + i]).collect();
        Self {
            n,
            storage: Storage::Dense(data),
            diag,
        }
    }

    /// CSR matrix from `(row, col, value)` triplets. Duplicates are summed.
    ///
    /// The pattern and values are symmetrized as `(M + M^T) / 2`; a warning
    /// is logged if that changed anything.
    pub fn csr_from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::Dimension(format!(
                    "triplet ({i}, {j}) out of range for n = {n}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
        let merged = merge_triplets(n, triplets.iter().copied());
        let transposed = merge_triplets(n, merged.iter().map(|&(i, j, v)| (j, i, v)));
        let mut entries = Vec::with_capacity(merged.len());
        let mut asymmetric = false;
        {
            // both lists are sorted by (row, col); walk them in lockstep
            let (mut a, mut b) = (0, 0);
            while a < merged.len() || b < transposed.len() {
                let ka = merged.get(a).map(|e| (e.0, e.1));
                let kb = transposed.get(b).map(|e| (e.0, e.1));
                match (ka, kb) {
                    (Some(x), Some(y)) if x == y => {
                        let (u, l) = (merged[a].2, transposed[b].2);
                        if u != l {
                            asymmetric = true;
                        }
                        entries.push((x.0, x.1, (u + l) / 2.0));
                        a += 1;
                        b += 1;
                    }
                    (Some(x), y) if y.is_none() || x < y.unwrap() => {
                        asymmetric = true;
                        entries.push((x.0, x.1, merged[a].2 / 2.0));
                        a += 1;
                    }
                    (_, Some(y)) => {
                        asymmetric = true;
                        entries.push((y.0, y.1, transposed[b].2 / 2.0));
                        b += 1;
                    }
                    _ => unreachable!(),
                }
            }
        }
        if asymmetric {
            warn!("input matrix is not symmetric; using (M + M^T) / 2");
        }
        Ok(Self::csr_from_sorted(n, &entries))
    }

    /// CSR from triplets that are already symmetric, sorted by (row, col) and unique.
    fn csr_from_sorted(n: usize, entries: &[(usize, usize, f64)]) -> Self {
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut diag = vec![0.0; n];
        for &(i, j, v) in entries {
            indptr[i + 1] += 1;
            indices.push(j);
            values.push(v);
            if i == j {
                diag[i] = v;
            }
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        Self {
            n,
            storage: Storage::Csr {
                indptr,
                indices,
                values,
            },
            diag,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored entries (`n^2` for dense storage).
    pub fn nnz(&self) -> usize {
        match &self.storage {
            Storage::Dense(d) => d.len(),
            Storage::Csr { values, .. } => values.len(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Csr { .. })
    }

    #[inline]
    pub fn diag(&self, i: usize) -> f64 {
        self.diag[i]
    }

    /// Entry lookup. `O(log nnz_row)` for CSR.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.n && j < self.n, "index out of range");
        match &self.storage {
            Storage::Dense(d) => d[i * self.n + j],
            Storage::Csr {
                indptr,
                indices,
                values,
            } => {
                let (lo, hi) = (indptr[i], indptr[i + 1]);
                match indices[lo..hi].binary_search(&j) {
                    Ok(k) => values[lo + k],
                    Err(_) => 0.0,
                }
            }
        }
    }

    /// Stored entries of row `i` as `(column, value)` pairs.
    pub fn row_entries(&self, i: usize) -> Box<dyn Iterator<Item = (usize, f64)> + '_> {
        match &self.storage {
            Storage::Dense(d) => Box::new(d[i * self.n..(i + 1) * self.n].iter().copied().enumerate()),
            Storage::Csr {
                indptr,
                indices,
                values,
            } => {
                let (lo, hi) = (indptr[i], indptr[i + 1]);
                Box::new(indices[lo..hi].iter().copied().zip(values[lo..hi].iter().copied()))
            }
        }
    }

    /// `sum_k M_ik v_k`, touching only stored entries.
    pub fn row_dot(&self, i: usize, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.n, "vector length must equal n");
        self.row_dot_strided(i, v, 1, 0)
    }

    /// `sum_k M_ik v[k * stride + offset]`; with a row-major `n x r` factor,
    /// `stride = r, offset = j` gives `M_{i:} X_{:j}`.
    #[inline]
    pub fn row_dot_strided(&self, i: usize, v: &[f64], stride: usize, offset: usize) -> f64 {
        match &self.storage {
            Storage::Dense(d) => {
                let row = &d[i * self.n..(i + 1) * self.n];
                let mut acc = 0.0;
                for (k, &m) in row.iter().enumerate() {
                    acc += m * v[k * stride + offset];
                }
                acc
            }
            Storage::Csr {
                indptr,
                indices,
                values,
            } => {
                let (lo, hi) = (indptr[i], indptr[i + 1]);
                let mut acc = 0.0;
                for (&k, &m) in indices[lo..hi].iter().zip(&values[lo..hi]) {
                    acc += m * v[k * stride + offset];
                }
                acc
            }
        }
    }

    /// Writes `X^T M_{:i}` (length `r`) into `out`, with `x` row-major `n x r`.
    pub fn row_times_factor(&self, i: usize, x: &[f64], r: usize, out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n * r);
        out.iter_mut().for_each(|o| *o = 0.0);
        match &self.storage {
            Storage::Dense(d) => {
                combine_rows(&d[i * self.n..(i + 1) * self.n], x, r, out);
            }
            Storage::Csr {
                indptr,
                indices,
                values,
            } => {
                let (lo, hi) = (indptr[i], indptr[i + 1]);
                for (&k, &m) in indices[lo..hi].iter().zip(&values[lo..hi]) {
                    let xk = &x[k * r..(k + 1) * r];
                    for (o, &v) in out.iter_mut().zip(xk) {
                        *o += m * v;
                    }
                }
            }
        }
    }

    /// `M X` as a row-major `n x r` buffer.
    pub fn mul_factor(&self, x: &[f64], r: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n * r];
        for i in 0..self.n {
            self.row_times_factor(i, x, r, &mut out[i * r..(i + 1) * r]);
        }
        out
    }

    /// Squared Frobenius norm.
    pub fn frobenius_sq(&self) -> f64 {
        match &self.storage {
            Storage::Dense(d) => d.iter().map(|v| v * v).sum(),
            Storage::Csr { values, .. } => values.iter().map(|v| v * v).sum(),
        }
    }

    /// Dense row-major copy.
    pub fn to_dense_vec(&self) -> Vec<f64> {
        match &self.storage {
            Storage::Dense(d) => d.clone(),
            Storage::Csr { .. } => {
                let mut out = vec![0.0; self.n * self.n];
                for i in 0..self.n {
                    for (j, v) in self.row_entries(i) {
                        out[i * self.n + j] = v;
                    }
                }
                out
            }
        }
    }

    pub fn to_dense(&self) -> Self {
        Self::from_dense_unchecked(self.n, self.to_dense_vec())
    }

    /// CSR copy keeping only nonzero entries.
    pub fn to_csr(&self) -> Self {
        let mut entries = Vec::new();
        for i in 0..self.n {
            for (j, v) in self.row_entries(i) {
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        Self::csr_from_sorted(self.n, &entries)
    }

    /// Checks every storage invariant. Constructors already guarantee these.
    pub fn validate(&self) -> Result<()> {
        if let Storage::Csr {
            indptr, indices, ..
        } = &self.storage
        {
            if indptr.len() != self.n + 1 || indptr.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::Dimension("row offsets are not non-decreasing".into()));
            }
            for i in 0..self.n {
                let cols = &indices[indptr[i]..indptr[i + 1]];
                if cols.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Dimension(format!(
                        "column indices of row {i} are not strictly increasing"
                    )));
                }
            }
        }
        for i in 0..self.n {
            for (j, v) in self.row_entries(i) {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
                if j > i {
                    let l = self.get(j, i);
                    if !symmetric_pair_ok(v, l) {
                        return Err(Error::NotSymmetric {
                            row: i,
                            col: j,
                            upper: v,
                            lower: l,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Sorts triplets by (row, col) and sums duplicates.
fn merge_triplets(
    n: usize,
    triplets: impl Iterator<Item = (usize, usize, f64)>,
) -> Vec<(usize, usize, f64)> {
    let mut t: Vec<_> = triplets.collect();
    t.sort_by_key(|&(i, j, _)| i * n + j);
    let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(t.len());
    for (i, j, v) in t {
        match out.last_mut() {
            Some(last) if last.0 == i && last.1 == j => last.2 += v,
            _ => out.push((i, j, v)),
        }
    }
    out
}

/// `out += sum_k coeffs[k] * rows[k]` where `rows` is row-major with width `r`.
pub(crate) fn combine_rows(coeffs: &[f64], rows: &[f64], r: usize, out: &mut [f64]) {
    debug_assert_eq!(coeffs.len() * r, rows.len());
    let out = &mut out[..r];
    // four rows per pass keeps the loop overhead off small r
    let mut chunks = coeffs.chunks_exact(4).zip(rows.chunks_exact(4 * r));
    for (c, x4) in &mut chunks {
        let (x0, rest) = x4.split_at(r);
        let (x1, rest) = rest.split_at(r);
        let (x2, x3) = rest.split_at(r);
        for j in 0..r {
            out[j] += c[0] * x0[j] + c[1] * x1[j] + c[2] * x2[j] + c[3] * x3[j];
        }
    }
    let done = coeffs.len() / 4 * 4;
    for (k, &c) in coeffs.iter().enumerate().skip(done) {
        for (o, &v) in out.iter_mut().zip(&rows[k * r..(k + 1) * r]) {
            *o += c * v;
        }
    }
}
