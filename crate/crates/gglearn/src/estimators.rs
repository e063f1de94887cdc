//! Regression-based empirical MI and CMI estimators and threshold testers.
//!
//! Inner products are raw (uncentered) dot products; callers with nonzero
//! means route through `center_by_differencing` first.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SampleBatch;

/// rho^2 is clamped here before the log so collinear columns stay finite.
pub const RHO_SQ_CLAMP: f64 = 1.0 - 1e-12;

/// Relative collinearity threshold for the regression denominator.
const COLLINEAR_TOL: f64 = 1e-12;

/// Relative squared-norm threshold below which a residual counts as zero.
const ZERO_RESIDUAL_TOL: f64 = 1e-18;

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn mi_from_rho_sq(rho_sq: f64) -> f64 {
    -0.5 * (1.0 - rho_sq.min(RHO_SQ_CLAMP)).ln()
}

fn check_columns(cols: &[&[f64]], min_len: usize) -> Result<usize> {
    let m = cols[0].len();
    for c in cols.iter().skip(1) {
        if c.len() != m {
            return Err(Error::LengthMismatch(m, c.len()));
        }
    }
    if m < min_len {
        return Err(Error::InsufficientSamples { needed: min_len, got: m });
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MiEstimate {
    pub rho_hat: f64,
    pub i_hat: f64,
    pub m: usize,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CmiEstimate {
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub gamma_hat: f64,
    pub rho_tilde: f64,
    pub i_hat: f64,
    pub m: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Independent,
    Dependent,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TestVerdict {
    pub decision: Decision,
    pub estimate: f64,
    pub threshold: f64,
    pub epsilon: f64,
    pub m: usize,
}

/// rho_hat = (X.Z)/sqrt((X.X)(Z.Z)), I_hat = -1/2 ln(1 - rho_hat^2).
pub fn empirical_mi(x: &[f64], z: &[f64]) -> Result<MiEstimate> {
    let m = check_columns(&[x, z], 2)?;
    let xx = dot(x, x);
    let zz = dot(z, z);
    if xx == 0.0 || zz == 0.0 {
        return Err(Error::DegenerateSample("zero-norm column".into()));
    }
    let rho = dot(x, z) / (xx * zz).sqrt();
    Ok(MiEstimate { rho_hat: rho, i_hat: mi_from_rho_sq(rho * rho), m })
}

/// Same computation as `empirical_mi`; the additive-estimation contract is
/// m = O(1/eps^2) samples for |I_hat - I| <= eps with high probability.
pub fn additive_mi_estimate(x: &[f64], y: &[f64]) -> Result<MiEstimate> {
    empirical_mi(x, y)
}

/// The alpha/beta/gamma regression and residual correlation of the CMI
/// estimator: X~ = X - alpha Z, Y~ = Y - (alpha beta + gamma) Z,
/// I_hat(X;Y|Z) = -1/2 ln(1 - rho(X~, Y~)^2).
pub fn empirical_cmi(x: &[f64], y: &[f64], z: &[f64]) -> Result<CmiEstimate> {
    let m = check_columns(&[x, y, z], 4)?;
    let xx = dot(x, x);
    let yy = dot(y, y);
    let zz = dot(z, z);
    if xx == 0.0 || yy == 0.0 || zz == 0.0 {
        return Err(Error::DegenerateSample("zero-norm column".into()));
    }
    let xy = dot(x, y);
    let xz = dot(x, z);
    let yz = dot(y, z);
    let den = xx * zz - xz * xz;
    if den <= COLLINEAR_TOL * xx * zz {
        return Err(Error::DegenerateSample("collinear X and Z columns".into()));
    }
    let alpha = xz / zz;
    let beta = (xy * zz - xz * yz) / den;
    let gamma = (yz * xx - xz * xy) / den;
    let y_coef = alpha * beta + gamma;
    let xt: Vec<f64> = x.iter().zip(z).map(|(xi, zi)| xi - alpha * zi).collect();
    let yt: Vec<f64> = y.iter().zip(z).map(|(yi, zi)| yi - y_coef * zi).collect();
    let xtxt = dot(&xt, &xt);
    let ytyt = dot(&yt, &yt);
    if xtxt <= ZERO_RESIDUAL_TOL * xx || ytyt <= ZERO_RESIDUAL_TOL * yy {
        return Err(Error::DegenerateSample("zero residual norm".into()));
    }
    let rho = dot(&xt, &yt) / (xtxt * ytyt).sqrt();
    Ok(CmiEstimate {
        alpha_hat: alpha,
        beta_hat: beta,
        gamma_hat: gamma,
        rho_tilde: rho,
        i_hat: mi_from_rho_sq(rho * rho),
        m,
    })
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(0.0 < epsilon && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be in (0,1), got {epsilon}")));
    }
    Ok(())
}

/// Dependent iff I_hat(X;Z) >= eps/8 (boundary inclusive).
pub fn test_mi(x: &[f64], z: &[f64], epsilon: f64) -> Result<TestVerdict> {
    check_epsilon(epsilon)?;
    let est = empirical_mi(x, z)?;
    let threshold = epsilon / 8.0;
    Ok(TestVerdict {
        decision: if est.i_hat >= threshold { Decision::Dependent } else { Decision::Independent },
        estimate: est.i_hat,
        threshold,
        epsilon,
        m: est.m,
    })
}

/// Dependent iff I_hat(X;Y|Z) >= eps/8 (boundary inclusive).
pub fn test_cmi(x: &[f64], y: &[f64], z: &[f64], epsilon: f64) -> Result<TestVerdict> {
    check_epsilon(epsilon)?;
    let est = empirical_cmi(x, y, z)?;
    let threshold = epsilon / 8.0;
    Ok(TestVerdict {
        decision: if est.i_hat >= threshold { Decision::Dependent } else { Decision::Independent },
        estimate: est.i_hat,
        threshold,
        epsilon,
        m: est.m,
    })
}

/// Reduction from nonzero-mean to zero-mean sampling: row t of the output is
/// row 2t - row 2t+1 of the input; a trailing odd row is dropped. The output
/// covariance doubles, which leaves all MI/CMI estimates invariant.
pub fn center_by_differencing(batch: &SampleBatch) -> Result<SampleBatch> {
    if batch.m < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: batch.m });
    }
    let pairs = batch.m / 2;
    let k = batch.k;
    let mut data = vec![0.0; pairs * k];
    for t in 0..pairs {
        for j in 0..k {
            data[t * k + j] = batch.get(2 * t, j) - batch.get(2 * t + 1, j);
        }
    }
    Ok(SampleBatch::new(pairs, k, data, batch.seed, format!("{}|diff", batch.origin)))
}

/// The 1-vs-2 variable empirical MI, I_hat(X; YZ), computed from the
/// 1/m-normalized empirical second-moment matrix of (Z, X, Y):
/// 1/2 ln( sigma_X^2 * det(M_{ZY}) / det(M) ).
/// Satisfies the exact identity I_hat(X;Z) + I_hat(X;Y|Z) = I_hat(X;YZ).
pub fn empirical_mi_joint(x: &[f64], y: &[f64], z: &[f64]) -> Result<f64> {
    let m = check_columns(&[x, y, z], 4)? as f64;
    let xx = dot(x, x) / m;
    let yy = dot(y, y) / m;
    let zz = dot(z, z) / m;
    let xy = dot(x, y) / m;
    let xz = dot(x, z) / m;
    let yz = dot(y, z) / m;
    // det of the (Z, X, Y) second-moment matrix
    let det_full = zz * (xx * yy - xy * xy) - xz * (xz * yy - xy * yz) + yz * (xz * xy - xx * yz);
    let det_zy = zz * yy - yz * yz;
    if det_full <= 0.0 || det_zy <= 0.0 || xx <= 0.0 {
        return Err(Error::DegenerateSample("singular empirical covariance".into()));
    }
    Ok(0.5 * (xx * det_zy / det_full).ln())
}
