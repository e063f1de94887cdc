//! Exact population-level Gaussian quantities: MI, CMI, entropy, KL, the
//! 3-variable linear SEM representation, and tree projections. These are the
//! ground-truth oracles the sample-based estimators are validated against.
//! All quantities are in nats.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sample_mvn, SampleBatch, SymMatrix};

#[derive(Debug, Clone)]
pub struct GaussianDistribution {
    mean: Vec<f64>,
    cov: SymMatrix,
}

impl GaussianDistribution {
    pub fn new(mean: Vec<f64>, cov: SymMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::InvalidParameter(format!(
                "mean length {} != covariance dimension {}",
                mean.len(),
                cov.dim()
            )));
        }
        cov.cholesky()?;
        Ok(GaussianDistribution { mean, cov })
    }

    pub fn zero_mean(cov: SymMatrix) -> Result<Self> {
        let n = cov.dim();
        Self::new(vec![0.0; n], cov)
    }

    pub fn dim(&self) -> usize {
        self.cov.dim()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &SymMatrix {
        &self.cov
    }

    pub fn sample(&self, m: usize, seed: u64, origin: &str) -> Result<SampleBatch> {
        sample_mvn(&self.mean, &self.cov, m, seed, origin)
    }
}

fn check_indices(dist: &GaussianDistribution, s: &[usize], name: &str) -> Result<()> {
    if s.is_empty() {
        return Err(Error::InvalidParameter(format!("index set {name} is empty")));
    }
    for &i in s {
        if i >= dist.dim() {
            return Err(Error::InvalidParameter(format!("index {i} out of range in {name}")));
        }
    }
    Ok(())
}

fn merged(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut v: Vec<usize> = a.iter().chain(b.iter()).copied().collect();
    v.sort_unstable();
    v.dedup();
    v
}

fn logdet_sub(cov: &SymMatrix, idx: &[usize]) -> Result<f64> {
    let d = cov.submatrix(idx).determinant();
    if d <= 0.0 {
        return Err(Error::SingularSubmatrix);
    }
    Ok(d.ln())
}

/// I(X_S; X_T) = 1/2 ln( det(M_S) det(M_T) / det(M_{S union T}) ).
pub fn gaussian_mi(dist: &GaussianDistribution, s: &[usize], t: &[usize]) -> Result<f64> {
    check_indices(dist, s, "S")?;
    check_indices(dist, t, "T")?;
    if s.iter().any(|i| t.contains(i)) {
        return Err(Error::InvalidParameter("S and T must be disjoint".into()));
    }
    let mut ss = s.to_vec();
    ss.sort_unstable();
    let mut tt = t.to_vec();
    tt.sort_unstable();
    let joint = merged(s, t);
    Ok(0.5 * (logdet_sub(dist.cov(), &ss)? + logdet_sub(dist.cov(), &tt)? - logdet_sub(dist.cov(), &joint)?))
}

/// I(X_S; X_T | X_R) = I(X_S; X_{R union T}) - I(X_S; X_R).
/// An empty R reduces to the unconditional MI.
pub fn gaussian_cmi(dist: &GaussianDistribution, s: &[usize], t: &[usize], r: &[usize]) -> Result<f64> {
    if r.is_empty() {
        return gaussian_mi(dist, s, t);
    }
    if r.iter().any(|i| s.contains(i) || t.contains(i)) {
        return Err(Error::InvalidParameter("S, T, R must be pairwise disjoint".into()));
    }
    let rt = merged(r, t);
    Ok(gaussian_mi(dist, s, &rt)? - gaussian_mi(dist, s, r)?)
}

/// Differential entropy 1/2 ln((2 pi e)^n det Sigma).
pub fn gaussian_entropy(dist: &GaussianDistribution) -> Result<f64> {
    let det = dist.cov().determinant();
    if det <= 0.0 {
        return Err(Error::SingularSubmatrix);
    }
    let n = dist.dim() as f64;
    Ok(0.5 * (n * (std::f64::consts::TAU * std::f64::consts::E).ln() + det.ln()))
}

/// KL divergence between Gaussians:
/// 1/2 (tr(S2^-1 S1) - n + ln det S2/det S1) + 1/2 (mu2-mu1)^T S2^-1 (mu2-mu1).
pub fn gaussian_kl(p: &GaussianDistribution, q: &GaussianDistribution) -> Result<f64> {
    let n = p.dim();
    if q.dim() != n {
        return Err(Error::InvalidParameter("dimension mismatch".into()));
    }
    let s2inv = q.cov().inverse().map_err(|_| Error::SingularSubmatrix)?;
    let mut tr = 0.0;
    for i in 0..n {
        for k in 0..n {
            tr += s2inv.get(i, k) * p.cov().get(k, i);
        }
    }
    let d1 = p.cov().determinant();
    let d2 = q.cov().determinant();
    if d1 <= 0.0 || d2 <= 0.0 {
        return Err(Error::SingularSubmatrix);
    }
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += (q.mean[i] - p.mean[i]) * s2inv.get(i, j) * (q.mean[j] - p.mean[j]);
        }
    }
    Ok(0.5 * (tr - n as f64 + (d2 / d1).ln()) + 0.5 * quad)
}

/// The 3-variable linear structural model
/// Z ~ N(0, a^2), X = alpha Z + V, Y = beta X + gamma Z + U,
/// with V ~ N(0, b^2), U ~ N(0, c^2), plus mean shifts. Variable order (X, Y, Z).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LinearSEM3 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub mu_x: f64,
    pub mu_y: f64,
    pub mu_z: f64,
}

impl LinearSEM3 {
    pub fn zero_mean(a: f64, b: f64, c: f64, alpha: f64, beta: f64, gamma: f64) -> Self {
        assert!(a > 0.0 && b > 0.0 && c > 0.0);
        LinearSEM3 { a, b, c, alpha, beta, gamma, mu_x: 0.0, mu_y: 0.0, mu_z: 0.0 }
    }

    /// Expands the linear system into the implied 3x3 Gaussian, order (X, Y, Z).
    pub fn to_distribution(&self) -> Result<GaussianDistribution> {
        let (a, b, c) = (self.a, self.b, self.c);
        let (al, be, ga) = (self.alpha, self.beta, self.gamma);
        let v_z = a * a;
        let v_x = al * al * v_z + b * b;
        let c_xz = al * v_z;
        let c_yz = be * c_xz + ga * v_z;
        let c_xy = be * v_x + ga * c_xz;
        let v_y = be * be * v_x + ga * ga * v_z + 2.0 * be * ga * c_xz + c * c;
        let cov = SymMatrix::from_rows(&[
            vec![v_x, c_xy, c_xz],
            vec![c_xy, v_y, c_yz],
            vec![c_xz, c_yz, v_z],
        ]);
        GaussianDistribution::new(vec![self.mu_x, self.mu_y, self.mu_z], cov)
    }

    /// Closed form I(X;Y|Z) = 1/2 ln(1 + beta^2 b^2 / c^2).
    pub fn cmi_closed_form(&self) -> f64 {
        0.5 * (1.0 + self.beta * self.beta * self.b * self.b / (self.c * self.c)).ln()
    }

    /// Closed form for I(X;Y) written directly in the SEM coefficients.
    /// Kept as a cross-check only: its (alpha beta + gamma)^2 term lacks an
    /// a^2 factor relative to direct expansion of the SEM covariance, so it
    /// matches the determinant route only when a = 1. The determinant-based
    /// `gaussian_mi` is authoritative.
    pub fn mi_coefficient_form(&self) -> f64 {
        let (a2, b2, c2) = (self.a * self.a, self.b * self.b, self.c * self.c);
        let (al, be, ga) = (self.alpha, self.beta, self.gamma);
        let num = (al * al * a2 + b2) * ((al * be + ga).powi(2) + be * be * b2 + c2);
        let den = a2 * b2 * ga * ga + c2 * (al * al * a2 + b2);
        0.5 * (num / den).ln()
    }
}

/// Undirected spanning tree on n labeled vertices, canonical edge list:
/// each pair sorted, list sorted lexicographically.
/// Serializes as a bare JSON array of [u, v] pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Serialize for Tree {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[usize; 2]> = self.edges.iter().map(|&(u, v)| [u, v]).collect();
        pairs.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Tree {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let pairs: Vec<[usize; 2]> = Vec::deserialize(deserializer)?;
        let n = pairs.iter().flat_map(|p| p.iter()).max().map_or(0, |&m| m + 1);
        Tree::new(n, pairs.into_iter().map(|[u, v]| (u, v)).collect())
            .map_err(serde::de::Error::custom)
    }
}

impl Tree {
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidTree("empty vertex set".into()));
        }
        if edges.len() != n - 1 {
            return Err(Error::InvalidTree(format!(
                "expected {} edges, got {}",
                n - 1,
                edges.len()
            )));
        }
        let mut canon: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, x: usize) -> usize {
            if parent[x] != x {
                let r = find(parent, parent[x]);
                parent[x] = r;
            }
            parent[x]
        }
        for &(u, v) in &edges {
            if u >= n || v >= n || u == v {
                return Err(Error::InvalidTree(format!("bad edge ({u},{v})")));
            }
            let (u, v) = if u < v { (u, v) } else { (v, u) };
            let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
            if ru == rv {
                return Err(Error::InvalidTree(format!("edge ({u},{v}) creates a cycle")));
            }
            parent[ru] = rv;
            canon.push((u, v));
        }
        canon.sort_unstable();
        Ok(Tree { n, edges: canon })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        let e = if u < v { (u, v) } else { (v, u) };
        self.edges.binary_search(&e).is_ok()
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }

    /// Vertices on the unique path from u to v, endpoints included.
    pub fn path(&self, u: usize, v: usize) -> Vec<usize> {
        let adj = self.adjacency();
        let mut prev = vec![usize::MAX; self.n];
        let mut stack = vec![u];
        prev[u] = u;
        while let Some(x) = stack.pop() {
            if x == v {
                break;
            }
            for &y in &adj[x] {
                if prev[y] == usize::MAX {
                    prev[y] = x;
                    stack.push(y);
                }
            }
        }
        let mut path = vec![v];
        let mut cur = v;
        while cur != u {
            cur = prev[cur];
            path.push(cur);
        }
        path.reverse();
        path
    }
}

/// A distribution whose covariance is the tree projection of some source.
#[derive(Debug, Clone)]
pub struct TreeGaussian {
    pub tree: Tree,
    pub base: GaussianDistribution,
}

/// Projects `dist` onto the Gaussian Markov model on `tree`: marginal
/// variances and edge correlations are preserved, and every non-edge
/// correlation becomes the product of edge correlations along the tree path.
pub fn tree_projection(dist: &GaussianDistribution, tree: &Tree) -> Result<TreeGaussian> {
    let n = dist.dim();
    if tree.n() != n {
        return Err(Error::InvalidParameter("tree does not span the distribution".into()));
    }
    let cov = dist.cov();
    let sd: Vec<f64> = (0..n).map(|i| cov.get(i, i).sqrt()).collect();
    let corr = |i: usize, j: usize| cov.get(i, j) / (sd[i] * sd[j]);
    let mut proj = SymMatrix::zero(n);
    for i in 0..n {
        proj.set(i, i, cov.get(i, i));
        for j in i + 1..n {
            let rho = if tree.has_edge(i, j) {
                corr(i, j)
            } else {
                let path = tree.path(i, j);
                path.windows(2).map(|w| corr(w[0], w[1])).product()
            };
            proj.set(i, j, rho * sd[i] * sd[j]);
        }
    }
    let base = GaussianDistribution::new(dist.mean().to_vec(), proj)?;
    Ok(TreeGaussian { tree: tree.clone(), base })
}

/// D_KL(P || P_T) = J_P - wt_P(T), with J_P = sum_v H(P_v) - H(P) and
/// wt_P(T) the sum of pairwise MIs over the tree edges.
pub fn kl_via_decomposition(dist: &GaussianDistribution, tree: &Tree) -> Result<f64> {
    let n = dist.dim();
    if tree.n() != n {
        return Err(Error::InvalidParameter("tree does not span the distribution".into()));
    }
    let det = dist.cov().determinant();
    if det <= 0.0 {
        return Err(Error::SingularSubmatrix);
    }
    // J_P = -1/2 ln det(correlation matrix)
    let mut log_var_sum = 0.0;
    for i in 0..n {
        log_var_sum += dist.cov().get(i, i).ln();
    }
    let j_p = 0.5 * (log_var_sum - det.ln());
    let mut wt = 0.0;
    for &(u, v) in tree.edges() {
        wt += gaussian_mi(dist, &[u], &[v])?;
    }
    Ok(j_p - wt)
}
