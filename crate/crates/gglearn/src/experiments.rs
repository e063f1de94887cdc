//! Monte-Carlo experiment harness: sample-complexity search (m* vs eps),
//! estimator convergence curves, and structure-recovery comparison against
//! the graphical-lasso baseline. All randomness flows from a single master
//! seed through per-(m, trial) substreams, so results are reproducible and
//! independent of thread scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{empirical_cmi, empirical_mi};
use crate::glasso::{graphical_lasso, precision_to_tree};
use crate::hard_instances::{realizable_block, BlockChoice, RealizableVariant};
use crate::linalg::{derive_seed, unbiased_covariance, SymMatrix};
use crate::model::{kl_via_decomposition, GaussianDistribution, Tree};
use crate::structure::{chow_liu, oracle_mst};

pub const LAMBDA_GRID: [f64; 6] = [0.5, 0.2, 0.1, 0.05, 0.02, 0.01];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: usize,
    pub success_threshold: f64,
    /// a trial succeeds when the approximation gap is <= this factor times eps
    pub kl_tolerance_factor: f64,
    pub m_max: usize,
    pub epsilons: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            trials: 1000,
            success_threshold: 0.95,
            kl_tolerance_factor: 0.25,
            m_max: 1 << 24,
            epsilons: vec![0.1, 0.07, 0.05, 0.03, 0.02, 0.015, 0.01],
        }
    }
}

impl ExperimentConfig {
    pub fn hash(&self) -> u64 {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for b in json.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}

/// Ordinary least squares fit of y = slope * x + intercept.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(Error::InvalidParameter("need at least 2 points for a line fit".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 {
        return Err(Error::InvalidParameter("degenerate x values in line fit".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(SlopeFit { slope, intercept: my - slope * mx, r_squared })
}

fn trial_success(
    dist: &GaussianDistribution,
    oracle_kl: f64,
    m: usize,
    seed: u64,
    trial: u64,
    gap_budget: f64,
) -> bool {
    let s = derive_seed(seed, m as u64, trial);
    let batch = match dist.sample(m, s, "mstar") {
        Ok(b) => b,
        Err(_) => return false,
    };
    let tree = match chow_liu(&batch) {
        Ok(t) => t,
        Err(_) => return false,
    };
    match kl_via_decomposition(dist, &tree) {
        Ok(kl) => kl - oracle_kl <= gap_budget,
        Err(_) => false,
    }
}

fn success_rate(
    dist: &GaussianDistribution,
    oracle_kl: f64,
    m: usize,
    config: &ExperimentConfig,
    gap_budget: f64,
) -> f64 {
    let hits: usize = (0..config.trials as u64)
        .into_par_iter()
        .map(|t| trial_success(dist, oracle_kl, m, config.seed, t, gap_budget) as usize)
        .sum();
    hits as f64 / config.trials as f64
}

/// Smallest m (found by doubling from 8 then binary search) at which the
/// fraction of trials whose learned tree is within the gap budget of the
/// best tree reaches the success threshold.
pub fn find_m_star(dist: &GaussianDistribution, epsilon: f64, config: &ExperimentConfig) -> Result<usize> {
    let best = oracle_mst(dist)?;
    let oracle_kl = kl_via_decomposition(dist, &best)?;
    let gap_budget = config.kl_tolerance_factor * epsilon;

    let mut lo = 4usize;
    let mut hi = 8usize;
    loop {
        if success_rate(dist, oracle_kl, hi, config, gap_budget) >= config.success_threshold {
            break;
        }
        lo = hi;
        hi *= 2;
        if hi > config.m_max {
            return Err(Error::SearchExhausted { limit: config.m_max });
        }
    }
    // invariant: rate(hi) passes; lo is the last m known (or assumed) to fail
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if success_rate(dist, oracle_kl, mid, config, gap_budget) >= config.success_threshold {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// m* across the configured eps grid, with a log-log slope fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MStarCurve {
    pub epsilons: Vec<f64>,
    pub m_star: Vec<usize>,
    pub fit: SlopeFit,
}

pub fn eps_vs_m_star<F>(make_dist: F, config: &ExperimentConfig) -> Result<MStarCurve>
where
    F: Fn(f64) -> Result<GaussianDistribution>,
{
    let mut m_star = Vec::with_capacity(config.epsilons.len());
    for &eps in &config.epsilons {
        let dist = make_dist(eps)?;
        m_star.push(find_m_star(&dist, eps, config)?);
    }
    let xs: Vec<f64> = config.epsilons.iter().map(|e| (1.0 / e).ln()).collect();
    let ys: Vec<f64> = m_star.iter().map(|&m| (m as f64).ln()).collect();
    let fit = fit_line(&xs, &ys)?;
    Ok(MStarCurve { epsilons: config.epsilons.clone(), m_star, fit })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvergenceKind {
    MiIndependent,
    MiDependent,
    CmiIndependent,
    CmiDependent,
}

impl ConvergenceKind {
    /// (distribution, true information value). MI kinds are bivariate over
    /// (X, Y); CMI kinds are trivariate over (X, Y, Z) conditioning on Z.
    pub fn instance(self) -> (GaussianDistribution, f64) {
        match self {
            ConvergenceKind::MiIndependent => {
                let cov = SymMatrix::identity(2);
                (GaussianDistribution::zero_mean(cov).unwrap(), 0.0)
            }
            ConvergenceKind::MiDependent => {
                // Y = X + V
                let cov = SymMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 2.0]]);
                (GaussianDistribution::zero_mean(cov).unwrap(), 0.5 * 2.0f64.ln())
            }
            ConvergenceKind::CmiIndependent => {
                // X = Z + V, Y = Z + U: I(X;Y|Z) = 0
                let cov = SymMatrix::from_rows(&[
                    vec![2.0, 1.0, 1.0],
                    vec![1.0, 2.0, 1.0],
                    vec![1.0, 1.0, 1.0],
                ]);
                (GaussianDistribution::zero_mean(cov).unwrap(), 0.0)
            }
            ConvergenceKind::CmiDependent => {
                // Y = X + Z + U: I(X;Y|Z) = 1/2 ln 2
                let cov = SymMatrix::from_rows(&[
                    vec![1.0, 1.0, 0.0],
                    vec![1.0, 3.0, 1.0],
                    vec![0.0, 1.0, 1.0],
                ]);
                (GaussianDistribution::zero_mean(cov).unwrap(), 0.5 * 2.0f64.ln())
            }
        }
    }

    pub fn truth(self) -> f64 {
        self.instance().1
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub m: usize,
    pub mean_error: f64,
    pub variance: f64,
    pub failed_trials: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceCurve {
    pub kind: ConvergenceKind,
    pub points: Vec<ConvergencePoint>,
    pub fit: SlopeFit,
}

/// Mean absolute estimation error |I_hat - I| as a function of m, with a
/// log-log slope fit. A trial that fails numerically (degenerate draw) is
/// retried once on a fresh substream and counted.
pub fn mi_convergence_curve(
    kind: ConvergenceKind,
    ms: &[usize],
    config: &ExperimentConfig,
) -> Result<ConvergenceCurve> {
    let (dist, truth) = kind.instance();
    let mut points = Vec::with_capacity(ms.len());
    for &m in ms {
        let results: Vec<(f64, usize)> = (0..config.trials as u64)
            .into_par_iter()
            .map(|t| {
                for attempt in 0..2u64 {
                    let s = derive_seed(config.seed, m as u64, t * 2 + attempt);
                    let est = dist.sample(m, s, "conv").and_then(|batch| match kind {
                        ConvergenceKind::MiIndependent | ConvergenceKind::MiDependent => {
                            empirical_mi(&batch.column(0), &batch.column(1)).map(|e| e.i_hat)
                        }
                        ConvergenceKind::CmiIndependent | ConvergenceKind::CmiDependent => {
                            empirical_cmi(&batch.column(0), &batch.column(1), &batch.column(2))
                                .map(|e| e.i_hat)
                        }
                    });
                    if let Ok(i_hat) = est {
                        return ((i_hat - truth).abs(), attempt as usize);
                    }
                }
                (f64::NAN, 2)
            })
            .collect();
        let failed_trials = results.iter().map(|&(_, f)| f.min(1)).sum();
        let errs: Vec<f64> = results.iter().map(|&(e, _)| e).filter(|e| e.is_finite()).collect();
        if errs.is_empty() {
            return Err(Error::DegenerateSample(format!("all trials failed at m={m}")));
        }
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        let var = errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / errs.len() as f64;
        points.push(ConvergencePoint { m, mean_error: mean, variance: var, failed_trials });
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.m as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.mean_error.ln()).collect();
    let fit = fit_line(&xs, &ys)?;
    Ok(ConvergenceCurve { kind, points, fit })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoveryPoint {
    pub m: usize,
    pub chow_liu_rate: f64,
    pub glasso_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoveryCurve {
    pub epsilon: f64,
    pub true_edges: Vec<(usize, usize)>,
    pub points: Vec<RecoveryPoint>,
}

/// Exact-recovery rate for Chow-Liu vs graphical lasso (best over the
/// lambda grid per trial) on the 3-node realizable chain instance.
/// A glasso run that fails to converge counts as a miss for that lambda.
pub fn recovery_comparison(epsilon: f64, ms: &[usize], config: &ExperimentConfig) -> Result<RecoveryCurve> {
    let dist = realizable_block(epsilon, 1, BlockChoice::R1, RealizableVariant::Chain)?;
    let truth = Tree::new(3, vec![(0, 2), (1, 2)])?;
    let mut points = Vec::with_capacity(ms.len());
    for &m in ms {
        let hits: (usize, usize) = (0..config.trials as u64)
            .into_par_iter()
            .map(|t| {
                let s = derive_seed(config.seed, m as u64, t);
                let batch = match dist.sample(m, s, "recovery") {
                    Ok(b) => b,
                    Err(_) => return (0, 0),
                };
                let cl_hit = chow_liu(&batch).map(|tr| tr.edges() == truth.edges()).unwrap_or(false);
                let gl_hit = unbiased_covariance(&batch)
                    .map(|s_hat| {
                        LAMBDA_GRID.iter().any(|&lambda| {
                            graphical_lasso(&s_hat, lambda, 1e-6, 500)
                                .ok()
                                .filter(|r| r.converged)
                                .and_then(|r| precision_to_tree(&r.theta).ok())
                                .map(|tr| tr.edges() == truth.edges())
                                .unwrap_or(false)
                        })
                    })
                    .unwrap_or(false);
                (cl_hit as usize, gl_hit as usize)
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        points.push(RecoveryPoint {
            m,
            chow_liu_rate: hits.0 as f64 / config.trials as f64,
            glasso_rate: hits.1 as f64 / config.trials as f64,
        });
    }
    Ok(RecoveryCurve { epsilon, true_edges: truth.edges().to_vec(), points })
}

/// CSV with a `# seed=<u64> config_hash=<u64>` metadata line. Floats are
/// written with `{}` formatting so the round-trip is bit exact.
pub fn write_csv(path: &str, header: &[&str], rows: &[Vec<String>], seed: u64, config_hash: u64) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# seed={seed} config_hash={config_hash}\n"));
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::InvalidParameter(format!("writing {path}: {e}")))
}

pub struct CsvFile {
    pub seed: Option<u64>,
    pub config_hash: Option<u64>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn read_csv(path: &str) -> Result<CsvFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidParameter(format!("reading {path}: {e}")))?;
    let mut seed = None;
    let mut config_hash = None;
    let mut header = Vec::new();
    let mut rows = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            for tok in meta.split_whitespace() {
                if let Some(v) = tok.strip_prefix("seed=") {
                    seed = v.parse().ok();
                } else if let Some(v) = tok.strip_prefix("config_hash=") {
                    config_hash = v.parse().ok();
                }
            }
            continue;
        }
        let fields: Vec<String> = line.split(',').map(|s| s.to_string()).collect();
        if header.is_empty() {
            header = fields;
        } else {
            rows.push(fields);
        }
    }
    Ok(CsvFile { seed, config_hash, header, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_fit_recovers_power_law() {
        // y = 3.7 x^{-0.5} on log axes is a line with slope -0.5
        let xs: Vec<f64> = [10.0, 100.0, 1000.0, 10000.0].iter().map(|m: &f64| m.ln()).collect();
        let ys: Vec<f64> = [10.0, 100.0, 1000.0, 10000.0]
            .iter()
            .map(|m: &f64| (3.7 * m.powf(-0.5)).ln())
            .collect();
        let fit = fit_line(&xs, &ys).unwrap();
        assert!((fit.slope - -0.5).abs() < 1e-9);
        assert!((fit.intercept - 3.7f64.ln()).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn line_fit_rejects_degenerate_input() {
        assert!(fit_line(&[1.0], &[2.0]).is_err());
        assert!(fit_line(&[1.0, 1.0], &[2.0, 3.0]).is_err());
        assert!(fit_line(&[1.0, 2.0], &[2.0]).is_err());
    }

    #[test]
    fn convergence_kinds_match_closed_forms() {
        use crate::model::{gaussian_cmi, gaussian_mi};
        for kind in [
            ConvergenceKind::MiIndependent,
            ConvergenceKind::MiDependent,
            ConvergenceKind::CmiIndependent,
            ConvergenceKind::CmiDependent,
        ] {
            let (dist, truth) = kind.instance();
            let val = match kind {
                ConvergenceKind::MiIndependent | ConvergenceKind::MiDependent => {
                    gaussian_mi(&dist, &[0], &[1]).unwrap()
                }
                _ => gaussian_cmi(&dist, &[0], &[1], &[2]).unwrap(),
            };
            assert!((val - truth).abs() < 1e-12, "{kind:?}: {val} vs {truth}");
        }
    }

    #[test]
    fn find_m_star_is_deterministic_and_small_for_easy_instance() {
        let dist = realizable_block(0.5, 1, BlockChoice::R1, RealizableVariant::Chain).unwrap();
        let config = ExperimentConfig { trials: 50, epsilons: vec![0.5], ..Default::default() };
        let a = find_m_star(&dist, 0.5, &config).unwrap();
        let b = find_m_star(&dist, 0.5, &config).unwrap();
        assert_eq!(a, b);
        assert!(a <= 4096, "m*={a}");
    }

    #[test]
    fn search_exhausted_when_cap_too_low() {
        let dist = realizable_block(0.01, 1, BlockChoice::R1, RealizableVariant::Chain).unwrap();
        let config = ExperimentConfig { trials: 20, m_max: 16, ..Default::default() };
        match find_m_star(&dist, 0.01, &config) {
            Err(Error::SearchExhausted { limit }) => assert_eq!(limit, 16),
            other => panic!("expected SearchExhausted, got {other:?}"),
        }
    }

    #[test]
    fn convergence_curve_error_shrinks() {
        let config = ExperimentConfig { trials: 200, ..Default::default() };
        let curve =
            mi_convergence_curve(ConvergenceKind::MiIndependent, &[100, 1000, 10000], &config).unwrap();
        assert!(curve.points[2].mean_error < curve.points[0].mean_error);
        assert!(curve.fit.slope < -0.5);
    }

    #[test]
    fn csv_roundtrip_is_bit_exact() {
        let dir = std::env::temp_dir().join("gglearn-csv-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("round.csv");
        let path = path.to_str().unwrap();
        let rows = vec![
            vec![format!("{}", 0.1f64), format!("{}", 123usize)],
            vec![format!("{}", 1.0 / 3.0), format!("{}", 7usize)],
        ];
        write_csv(path, &["eps", "m_star"], &rows, 42, 99).unwrap();
        let back = read_csv(path).unwrap();
        assert_eq!(back.seed, Some(42));
        assert_eq!(back.config_hash, Some(99));
        assert_eq!(back.header, vec!["eps", "m_star"]);
        assert_eq!(back.rows, rows);
        let v: f64 = back.rows[1][0].parse().unwrap();
        assert_eq!(v, 1.0 / 3.0);
    }

    #[test]
    fn recovery_rates_increase_with_m() {
        let config = ExperimentConfig { trials: 60, ..Default::default() };
        let curve = recovery_comparison(0.3, &[20, 2000], &config).unwrap();
        assert!(curve.points[1].chow_liu_rate >= curve.points[0].chow_liu_rate);
        assert!(curve.points[1].chow_liu_rate > 0.9);
    }
}
