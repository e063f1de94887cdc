//! Graphical lasso baseline: block coordinate descent on the penalized
//! log-likelihood, plus extraction of a spanning tree from the estimated
//! precision matrix.

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::model::Tree;
use crate::structure::{maximum_spanning_tree, WeightedEdgeList};

#[derive(Debug, Clone)]
pub struct GlassoResult {
    pub theta: SymMatrix,
    pub sigma: SymMatrix,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
}

fn objective(s: &SymMatrix, theta: &SymMatrix, lambda: f64) -> f64 {
    let n = s.dim();
    let prod = s.matmul(theta);
    let mut tr = 0.0;
    for (i, row) in prod.iter().enumerate() {
        tr += row[i];
    }
    let mut l1 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                l1 += theta.get(i, j).abs();
            }
        }
    }
    tr - theta.determinant().ln() + lambda * l1
}

/// Coordinate-descent lasso for the inner subproblem:
/// minimize 1/2 b' V b - b' u + lambda |b|_1.
fn lasso(v: &[Vec<f64>], u: &[f64], lambda: f64, tol: f64) -> Vec<f64> {
    let p = u.len();
    let mut beta = vec![0.0; p];
    for _ in 0..10_000 {
        let mut max_step = 0.0f64;
        for j in 0..p {
            let mut r = u[j];
            for k in 0..p {
                if k != j {
                    r -= v[j][k] * beta[k];
                }
            }
            let new = soft_threshold(r, lambda) / v[j][j];
            let step = (new - beta[j]).abs();
            if step > max_step {
                max_step = step;
            }
            beta[j] = new;
        }
        if max_step < tol {
            break;
        }
    }
    beta
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Friedman-style block coordinate descent. `s` should be an empirical
/// covariance (unbiased normalization). Hitting `max_iter` is reported via
/// `converged = false`, not an error.
pub fn graphical_lasso(s: &SymMatrix, lambda: f64, tol: f64, max_iter: usize) -> Result<GlassoResult> {
    let n = s.dim();
    if lambda < 0.0 {
        return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
    }
    for i in 0..n {
        if s.get(i, i) <= 0.0 {
            return Err(Error::DegenerateSample(format!("nonpositive variance at column {i}")));
        }
    }

    // W = S + lambda I is the standard initialization; always PD.
    let mut w = s.clone();
    for i in 0..n {
        w.set(i, i, s.get(i, i) + lambda);
    }

    let mut betas = vec![vec![0.0; n - 1]; n];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..max_iter {
        iterations = iter + 1;
        let mut max_delta = 0.0f64;
        for j in 0..n {
            let others: Vec<usize> = (0..n).filter(|&k| k != j).collect();
            // W11 over the complement of j, s12 = column j of S
            let mut v = vec![vec![0.0; n - 1]; n - 1];
            for (a, &ia) in others.iter().enumerate() {
                for (b, &ib) in others.iter().enumerate() {
                    v[a][b] = w.get(ia, ib);
                }
            }
            let u: Vec<f64> = others.iter().map(|&k| s.get(j, k)).collect();
            let beta = lasso(&v, &u, lambda, tol * 1e-2);
            // w12 = W11 beta
            for (a, &ia) in others.iter().enumerate() {
                let mut val = 0.0;
                for (b, bb) in beta.iter().enumerate() {
                    val += v[a][b] * bb;
                }
                let delta = (val - w.get(ia, j)).abs();
                if delta > max_delta {
                    max_delta = delta;
                }
                w.set(ia, j, val);
            }
            betas[j] = beta;
        }
        trace.push(objective(s, &w.inverse()?, lambda));
        if max_delta < tol {
            converged = true;
            break;
        }
    }

    // Recover Theta from W and the final regression coefficients.
    let mut theta = SymMatrix::zero(n);
    for j in 0..n {
        let others: Vec<usize> = (0..n).filter(|&k| k != j).collect();
        let mut dot = 0.0;
        for (a, &ia) in others.iter().enumerate() {
            dot += w.get(ia, j) * betas[j][a];
        }
        let theta_jj = 1.0 / (w.get(j, j) - dot);
        theta.set(j, j, theta_jj);
        for (a, &ia) in others.iter().enumerate() {
            if ia > j {
                theta.set(j, ia, -betas[j][a] * theta_jj);
            }
        }
    }

    Ok(GlassoResult { theta, sigma: w, lambda, iterations, converged, objective_trace: trace })
}

/// Spanning tree from a precision estimate: maximum spanning tree over
/// absolute off-diagonal entries. For n = 3 this reduces to dropping the
/// weakest of the three partial correlations.
pub fn precision_to_tree(theta: &SymMatrix) -> Result<Tree> {
    let n = theta.dim();
    let mut weights = WeightedEdgeList::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            weights.set(i, j, theta.get(i, j).abs());
        }
    }
    Ok(maximum_spanning_tree(&weights))
}
