#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snmf_core::{FactorMatrix, SimilarityMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Symmetric matrix with entries uniform in `[lo, hi)`.
pub fn random_symmetric(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = rng.random_range(lo..hi);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

pub fn random_factor(rng: &mut impl Rng, n: usize, r: usize, hi: f64) -> Vec<f64> {
    (0..n * r).map(|_| rng.random_range(0.0..hi)).collect()
}

pub fn dense(n: usize, d: &[f64]) -> SimilarityMatrix {
    SimilarityMatrix::dense(n, d.to_vec()).unwrap()
}

pub fn factor(n: usize, r: usize, d: &[f64]) -> FactorMatrix {
    FactorMatrix::from_row_major(n, r, d.to_vec()).unwrap()
}

/// `|M - X X^T|_F^2` by forming `X X^T` entry by entry.
pub fn brute_objective(m: &[f64], x: &[f64], n: usize, r: usize) -> f64 {
    let mut f = 0.0;
    for i in 0..n {
        for j in 0..n {
            let xx: f64 = (0..r).map(|k| x[i * r + k] * x[j * r + k]).sum();
            let e = m[i * n + j] - xx;
            f += e * e;
        }
    }
    f
}

/// `X^T X` and `diag(X X^T)` from scratch.
pub fn brute_gram(x: &[f64], n: usize, r: usize) -> (Vec<f64>, Vec<f64>) {
    let mut g = vec![0.0; r * r];
    for a in 0..r {
        for b in 0..r {
            g[a * r + b] = (0..n).map(|i| x[i * r + a] * x[i * r + b]).sum();
        }
    }
    let d = (0..n)
        .map(|i| (0..r).map(|k| x[i * r + k] * x[i * r + k]).sum())
        .collect();
    (g, d)
}

/// Root of a nondecreasing `f` on `[lo, hi]` with `f(lo) <= 0 <= f(hi)`.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
