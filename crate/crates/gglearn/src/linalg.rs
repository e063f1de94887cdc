//! Dense small-matrix utilities and seeded multivariate normal sampling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::{self, Deserializer};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cholesky pivots at or below this value are treated as non-PD.
pub const PD_PIVOT_TOL: f64 = 1e-12;

/// Symmetric n-by-n matrix, dense row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zero(n: usize) -> Self {
        assert!(n >= 1);
        SymMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zero(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = v;
        }
        m
    }

    /// Builds from full rows; panics if the rows are not square and symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        assert!(n >= 1, "empty matrix");
        let mut m = Self::zero(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "row {i} has wrong length");
            for (j, &v) in row.iter().enumerate() {
                assert!(
                    (v - rows[j][i]).abs() <= 1e-9 * (1.0 + v.abs()),
                    "asymmetric entry at ({i},{j})"
                );
                m.data[i * n + j] = v;
            }
        }
        // enforce exact symmetry
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (m.data[i * n + j] + m.data[j * n + i]);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| self.data[i * self.n..(i + 1) * self.n].to_vec())
            .collect()
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        SymMatrix { n: self.n, data: self.data.iter().map(|v| c * v).collect() }
    }

    /// Principal submatrix on the given (strictly increasing) index set.
    pub fn submatrix(&self, idx: &[usize]) -> SymMatrix {
        let k = idx.len();
        let mut m = SymMatrix::zero(k);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m.data[a * k + b] = self.get(i, j);
            }
        }
        m
    }

    /// Lower-triangular Cholesky factor L with self = L*L^T.
    ///
    /// Fails with `NotPositiveDefinite` if any pivot is <= `PD_PIVOT_TOL`.
    pub fn cholesky(&self) -> Result<Vec<f64>> {
        let n = self.n;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= PD_PIVOT_TOL {
                        return Err(Error::NotPositiveDefinite { index: i, pivot: s });
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(l)
    }

    pub fn is_pd(&self) -> bool {
        self.cholesky().is_ok()
    }

    /// Determinant; closed form for n <= 3, LU with partial pivoting above.
    pub fn determinant(&self) -> f64 {
        let n = self.n;
        match n {
            1 => self.get(0, 0),
            2 => self.get(0, 0) * self.get(1, 1) - self.get(0, 1) * self.get(1, 0),
            3 => {
                let a = self.get(0, 0);
                let b = self.get(0, 1);
                let c = self.get(0, 2);
                let d = self.get(1, 1);
                let e = self.get(1, 2);
                let f = self.get(2, 2);
                a * (d * f - e * e) - b * (b * f - e * c) + c * (b * e - d * c)
            }
            _ => {
                let mut a = self.data.clone();
                let mut det = 1.0;
                for col in 0..n {
                    let mut piv = col;
                    for r in col + 1..n {
                        if a[r * n + col].abs() > a[piv * n + col].abs() {
                            piv = r;
                        }
                    }
                    if a[piv * n + col] == 0.0 {
                        return 0.0;
                    }
                    if piv != col {
                        for k in 0..n {
                            a.swap(col * n + k, piv * n + k);
                        }
                        det = -det;
                    }
                    let p = a[col * n + col];
                    det *= p;
                    for r in col + 1..n {
                        let factor = a[r * n + col] / p;
                        for k in col..n {
                            a[r * n + k] -= factor * a[col * n + k];
                        }
                    }
                }
                det
            }
        }
    }

    /// Inverse via the Cholesky factorization.
    pub fn inverse(&self) -> Result<SymMatrix> {
        let n = self.n;
        let l = self.cholesky()?;
        // solve L L^T X = I column by column
        let mut inv = SymMatrix::zero(n);
        let mut y = vec![0.0; n];
        for col in 0..n {
            for i in 0..n {
                let mut s = if i == col { 1.0 } else { 0.0 };
                for k in 0..i {
                    s -= l[i * n + k] * y[k];
                }
                y[i] = s / l[i * n + i];
            }
            for i in (0..n).rev() {
                let mut s = y[i];
                for k in i + 1..n {
                    s -= l[k * n + i] * y[k];
                }
                y[i] = s / l[i * n + i];
                inv.data[i * n + col] = y[i];
            }
        }
        // symmetrize against round-off
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (inv.data[i * n + j] + inv.data[j * n + i]);
                inv.data[i * n + j] = v;
                inv.data[j * n + i] = v;
            }
        }
        Ok(inv)
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// self * other, returned as dense rows (result need not be symmetric).
    pub fn matmul(&self, other: &SymMatrix) -> Vec<Vec<f64>> {
        let n = self.n;
        assert_eq!(n, other.n);
        let mut out = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += self.get(i, k) * other.get(k, j);
                }
                out[i][j] = s;
            }
        }
        out
    }

    /// Largest absolute eigenvalue estimate of (self - other), via power iteration.
    pub fn spectral_distance(&self, other: &SymMatrix) -> f64 {
        let n = self.n;
        assert_eq!(n, other.n);
        let mut v = vec![1.0 / (n as f64).sqrt(); n];
        let mut lambda = 0.0;
        for _ in 0..200 {
            let mut w = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    w[i] += (self.get(i, j) - other.get(i, j)) * v[j];
                }
            }
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            lambda = norm;
            for i in 0..n {
                v[i] = w[i] / norm;
            }
        }
        lambda
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows = self.rows();
        let mut seq = serializer.serialize_seq(Some(rows.len()))?;
        for row in rows {
            seq.serialize_element(&row)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for SymMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(deserializer)?;
        if rows.is_empty() {
            return Err(de::Error::custom("empty matrix"));
        }
        let n = rows.len();
        for row in &rows {
            if row.len() != n {
                return Err(de::Error::custom("non-square matrix"));
            }
        }
        Ok(SymMatrix::from_rows(&rows))
    }
}

/// An m-by-k batch of i.i.d. draws with known provenance.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub m: usize,
    pub k: usize,
    /// row-major, one sample per row
    pub data: Vec<f64>,
    pub seed: u64,
    pub origin: String,
}

impl SampleBatch {
    pub fn new(m: usize, k: usize, data: Vec<f64>, seed: u64, origin: String) -> Self {
        assert!(m >= 1 && k >= 1);
        assert_eq!(data.len(), m * k);
        assert!(data.iter().all(|v| v.is_finite()), "non-finite entry in batch");
        SampleBatch { m, k, data, seed, origin }
    }

    #[inline]
    pub fn get(&self, t: usize, j: usize) -> f64 {
        self.data[t * self.k + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        assert!(j < self.k);
        (0..self.m).map(|t| self.get(t, j)).collect()
    }
}

/// Deterministic seed derivation for per-trial substreams (splitmix64-style).
pub fn derive_seed(master: u64, a: u64, b: u64) -> u64 {
    let mut x = master ^ a.wrapping_mul(0x9e3779b97f4a7c15) ^ b.wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Standard-normal stream: Box-Muller over a seeded ChaCha generator.
pub struct NormalRng {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalRng {
    pub fn new(seed: u64) -> Self {
        NormalRng { rng: ChaCha8Rng::seed_from_u64(seed), spare: None }
    }

    #[inline]
    fn uniform(&mut self) -> f64 {
        // 53-bit uniform in [0, 1)
        (self.rng.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let mut u1 = self.uniform();
        while u1 == 0.0 {
            u1 = self.uniform();
        }
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// Draws m i.i.d. rows from N(mean, cov) as mean + L*g, deterministic in the seed.
pub fn sample_mvn(mean: &[f64], cov: &SymMatrix, m: usize, seed: u64, origin: &str) -> Result<SampleBatch> {
    let k = cov.dim();
    assert_eq!(mean.len(), k);
    assert!(m >= 1);
    let l = cov.cholesky()?;
    let mut rng = NormalRng::new(seed);
    let mut data = vec![0.0; m * k];
    let mut g = vec![0.0; k];
    for t in 0..m {
        for gi in g.iter_mut() {
            *gi = rng.next_normal();
        }
        for i in 0..k {
            let mut s = mean[i];
            for j in 0..=i {
                s += l[i * k + j] * g[j];
            }
            data[t * k + i] = s;
        }
    }
    Ok(SampleBatch::new(m, k, data, seed, origin.to_string()))
}

/// Empirical covariance with 1/m normalization (the estimator convention used
/// throughout the testers). When `centered`, column means are subtracted first.
pub fn empirical_covariance(batch: &SampleBatch, centered: bool) -> Result<SymMatrix> {
    let (m, k) = (batch.m, batch.k);
    if centered && m < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: m });
    }
    let mut means = vec![0.0; k];
    if centered {
        for t in 0..m {
            for j in 0..k {
                means[j] += batch.get(t, j);
            }
        }
        for mu in means.iter_mut() {
            *mu /= m as f64;
        }
    }
    let mut cov = SymMatrix::zero(k);
    for i in 0..k {
        for j in i..k {
            let mut s = 0.0;
            for t in 0..m {
                s += (batch.get(t, i) - means[i]) * (batch.get(t, j) - means[j]);
            }
            cov.set(i, j, s / m as f64);
        }
    }
    for j in 0..k {
        if cov.get(j, j) == 0.0 {
            return Err(Error::DegenerateSample(format!("constant column {j}")));
        }
    }
    Ok(cov)
}

/// Centered 1/(m-1) covariance; statistical convention used by the glasso
/// baseline only.
pub fn unbiased_covariance(batch: &SampleBatch) -> Result<SymMatrix> {
    if batch.m < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: batch.m });
    }
    let c = empirical_covariance(batch, true)?;
    Ok(c.scale(batch.m as f64 / (batch.m as f64 - 1.0)))
}
