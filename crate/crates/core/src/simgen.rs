//! Test-instance generators and the scale-matched initializer.
//!
//! * CK (correlation kernel): `M = X_data X_data^T + (sigma/2)(N + N^T)`
//!   with sparse exponential `X_data` and Gaussian `N`. Dense output.
//! * SGK (sparse Gaussian kernel): self-tuned Gaussian affinities between
//!   exponential data points, kept on the symmetric k-nearest-neighbour
//!   graph and degree-normalized. CSR output.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::factor::FactorMatrix;
use crate::matrix::SimilarityMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ck,
    Sgk,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorSpec {
    pub method: Method,
    pub n: usize,
    /// Columns of the latent data matrix.
    pub m: usize,
    /// Fraction of zeroed data entries (CK).
    pub sparsity: f64,
    /// Noise level (CK).
    pub noise_sigma: f64,
    /// Neighbours kept per point (SGK); `None` means `floor(log2 n) + 1`.
    pub knn_k: Option<usize>,
    /// Neighbour whose distance sets a point's kernel width (SGK).
    pub scale_neighbor: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn ck(n: usize, m: usize, seed: u64) -> Self {
        Self {
            method: Method::Ck,
            n,
            m,
            sparsity: 0.0,
            noise_sigma: 0.1,
            knn_k: None,
            scale_neighbor: 7,
            seed,
        }
    }

    pub fn sgk(n: usize, m: usize, seed: u64) -> Self {
        Self {
            method: Method::Sgk,
            ..Self::ck(n, m, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::Config("generator dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.sparsity) {
            return Err(Error::Config(format!(
                "sparsity must lie in [0, 1), got {}",
                self.sparsity
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!(
                "noise sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        if self.knn_k == Some(0) || self.scale_neighbor == 0 {
            return Err(Error::Config("neighbour counts must be positive".into()));
        }
        if self.method == Method::Sgk && self.n < 2 {
            return Err(Error::Config("SGK needs at least two points".into()));
        }
        Ok(())
    }

    pub fn effective_knn(&self) -> usize {
        let k = self
            .knn_k
            .unwrap_or_else(|| self.n.max(1).ilog2() as usize + 1);
        k.min(self.n.saturating_sub(1)).max(1)
    }

    pub fn effective_scale_neighbor(&self) -> usize {
        self.scale_neighbor.min(self.n.saturating_sub(1)).max(1)
    }
}

/// Exponential(1) by inverse CDF.
fn exponential(rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln()
}

#[derive(Debug, Clone)]
pub struct CkInstance {
    pub matrix: SimilarityMatrix,
    /// Row-major `n x m`.
    pub x_data: Vec<f64>,
}

pub fn generate_ck(spec: &GeneratorSpec) -> Result<CkInstance> {
    spec.validate()?;
    let (n, m) = (spec.n, spec.m);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut x_data: Vec<f64> = (0..n * m).map(|_| exponential(&mut rng)).collect();
    let zeros = (spec.sparsity * (n * m) as f64).round() as usize;
    for k in sample(&mut rng, n * m, zeros.min(n * m)) {
        x_data[k] = 0.0;
    }
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v: f64 = (0..m).map(|k| x_data[i * m + k] * x_data[j * m + k]).sum();
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    if spec.noise_sigma > 0.0 {
        let noise: Vec<f64> = (0..n * n).map(|_| rng.sample(StandardNormal)).collect();
        let half = spec.noise_sigma / 2.0;
        for i in 0..n {
            for j in 0..=i {
                let e = half * (noise[i * n + j] + noise[j * n + i]);
                data[i * n + j] += e;
                if i != j {
                    data[j * n + i] += e;
                }
            }
        }
    }
    Ok(CkInstance {
        matrix: SimilarityMatrix::dense(n, data)?,
        x_data,
    })
}

pub fn generate_sgk(spec: &GeneratorSpec) -> Result<SimilarityMatrix> {
    spec.validate()?;
    let (n, m) = (spec.n, spec.m);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let points: Vec<f64> = (0..n * m).map(|_| exponential(&mut rng)).collect();
    sgk_from_points(n, m, &points, spec.effective_knn(), spec.effective_scale_neighbor())
}

/// Builds the SGK similarity matrix from `n` points of dimension `m`
/// (row-major).
pub fn sgk_from_points(
    n: usize,
    m: usize,
    points: &[f64],
    knn: usize,
    scale_neighbor: usize,
) -> Result<SimilarityMatrix> {
    assert_eq!(points.len(), n * m);
    let dist_sq = |i: usize, j: usize| -> f64 {
        (0..m)
            .map(|k| (points[i * m + k] - points[j * m + k]).powi(2))
            .sum()
    };
    let mut d2 = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..i {
            let v = dist_sq(i, j);
            d2[i * n + j] = v;
            d2[j * n + i] = v;
        }
    }
    let mut sigma = vec![0.0; n];
    let mut neighbours = vec![false; n * n];
    for i in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        // ties broken by index for determinism
        others.sort_by(|&a, &b| d2[i * n + a].total_cmp(&d2[i * n + b]).then(a.cmp(&b)));
        sigma[i] = d2[i * n + others[scale_neighbor - 1]].sqrt();
        if sigma[i] == 0.0 {
            return Err(Error::DuplicatePoint { index: i });
        }
        for &j in &others[..knn] {
            neighbours[i * n + j] = true;
        }
    }
    let mut affinity = Vec::new();
    let mut degree = vec![0.0; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if neighbours[i * n + j] || neighbours[j * n + i] {
                let a = (-d2[i * n + j] / (sigma[i] * sigma[j])).exp();
                if a > 0.0 {
                    affinity.push((i, j, a));
                    degree[i] += a;
                    degree[j] += a;
                }
            }
        }
    }
    let inv_sqrt: Vec<f64> = degree
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let mut triplets = Vec::with_capacity(2 * affinity.len());
    for (i, j, a) in affinity {
        let v = a * inv_sqrt[i] * inv_sqrt[j];
        triplets.push((i, j, v));
        triplets.push((j, i, v));
    }
    SimilarityMatrix::csr_from_triplets(n, &triplets)
}

/// Dispatches on `spec.method`.
pub fn generate(spec: &GeneratorSpec) -> Result<SimilarityMatrix> {
    match spec.method {
        Method::Ck => Ok(generate_ck(spec)?.matrix),
        Method::Sgk => generate_sgk(spec),
    }
}

/// Uniform `[0, 1)` factor scaled by `sqrt(alpha)`, where `alpha >= 0`
/// minimizes `|M - alpha X0 X0^T|_F^2`.
pub fn initialize(m: &SimilarityMatrix, r: usize, seed: u64) -> FactorMatrix {
    let n = m.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..n * r).map(|_| rng.random::<f64>()).collect();
    let mut x0 = FactorMatrix::from_row_major(n, r, data).expect("uniform draws are valid");
    if let Some(alpha) = scale_match(m, &x0) {
        x0.scale(alpha.sqrt());
    }
    x0
}

/// `max(0, <M, X X^T> / |X X^T|^2)`, or `None` when `X X^T` vanishes.
pub fn scale_match(m: &SimilarityMatrix, x: &FactorMatrix) -> Option<f64> {
    let gram = x.gram();
    let denom: f64 = gram.iter().map(|g| g * g).sum();
    if denom.sqrt() < 1e-300 {
        return None;
    }
    let mx = m.mul_factor(x.as_slice(), x.r());
    let inner: f64 = x.as_slice().iter().zip(&mx).map(|(a, b)| a * b).sum();
    Some((inner / denom).max(0.0))
}
