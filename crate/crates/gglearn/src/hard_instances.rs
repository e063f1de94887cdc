//! Generators for the lower-bound instance families: the two-variable
//! testing pairs, the realizable and non-realizable 3-node blocks, the
//! independent block composition, and the greedy Hamming-distance codebook
//! used to pick far-apart compositions.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::model::GaussianDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockKind {
    Realizable,
    NonRealizable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockChoice {
    R1,
    R2,
}

/// Two realizable hard families: the shared-noise system (det = 3,
/// KL = eps/n) is the default; the chain system (the one the convergence
/// experiments sample from) is available behind this flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RealizableVariant {
    #[default]
    SharedNoise,
    Chain,
}

fn check_eps(epsilon: f64) -> Result<()> {
    if !(0.0 < epsilon && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be in (0,1), got {epsilon}")));
    }
    Ok(())
}

/// MI-tester lower-bound pair: H0 independent standard, H1 with
/// Y = sqrt(eps) X + V. KL both ways is eps/2; I(H1) = 1/2 ln(1 + eps).
pub fn mi_test_pair(epsilon: f64) -> Result<(GaussianDistribution, GaussianDistribution)> {
    check_eps(epsilon)?;
    let h0 = GaussianDistribution::zero_mean(SymMatrix::identity(2))?;
    let r = epsilon.sqrt();
    let h1 = GaussianDistribution::zero_mean(SymMatrix::from_rows(&[
        vec![1.0, r],
        vec![r, 1.0 + epsilon],
    ]))?;
    Ok((h0, h1))
}

/// Additive-estimation lower-bound pair: Y = (1/2 +- eps) X + V.
/// Both determinants are 1; KL both ways is 2 eps^2.
pub fn additive_estimation_pair(epsilon: f64) -> Result<(GaussianDistribution, GaussianDistribution)> {
    check_eps(epsilon)?;
    let mk = |s: f64| {
        GaussianDistribution::zero_mean(SymMatrix::from_rows(&[
            vec![1.0, 0.5 + s],
            vec![0.5 + s, 1.25 + s + epsilon * epsilon],
        ]))
    };
    Ok((mk(epsilon)?, mk(-epsilon)?))
}

/// One realizable 3-node block over (X, Y, Z) at per-block scale t = eps/n.
///
/// Shared-noise family (det = 3, KL(R1||R2) = eps/n):
///   R1: X = U, Y = V + B, Z = sqrt(t) X + W + B.
///   R2: X = U, Y = sqrt(t) X + V + B, Z = W + B.
/// Chain family (gamma = 1/2):
///   R1: Y = U, Z = Y/2 + W, X = sqrt(t) Z + V.
///   R2: Y = U, Z = Y/2 + W, X = sqrt(t) Y + V.
pub fn realizable_block(
    epsilon: f64,
    n: usize,
    which: BlockChoice,
    variant: RealizableVariant,
) -> Result<GaussianDistribution> {
    check_eps(epsilon)?;
    if n < 1 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    let t = epsilon / n as f64;
    let r = t.sqrt();
    let cov = match (variant, which) {
        (RealizableVariant::SharedNoise, BlockChoice::R1) => SymMatrix::from_rows(&[
            vec![1.0, 0.0, r],
            vec![0.0, 2.0, 1.0],
            vec![r, 1.0, 2.0 + t],
        ]),
        (RealizableVariant::SharedNoise, BlockChoice::R2) => SymMatrix::from_rows(&[
            vec![1.0, r, 0.0],
            vec![r, 2.0 + t, 1.0],
            vec![0.0, 1.0, 2.0],
        ]),
        (RealizableVariant::Chain, BlockChoice::R1) => SymMatrix::from_rows(&[
            vec![1.25 * t + 1.0, 0.5 * r, 1.25 * r],
            vec![0.5 * r, 1.0, 0.5],
            vec![1.25 * r, 0.5, 1.25],
        ]),
        (RealizableVariant::Chain, BlockChoice::R2) => SymMatrix::from_rows(&[
            vec![t + 1.0, r, 0.5 * r],
            vec![r, 1.0, 0.5],
            vec![0.5 * r, 0.5, 1.25],
        ]),
    };
    GaussianDistribution::zero_mean(cov)
}

/// One non-realizable 3-node block over (X, Y, Z) at t = eps/n: each
/// coordinate is a loading times a shared B plus unit noise, loadings
/// (1+t, 1+2t, 1+3t) for R1 and (1+t, 1+3t, 1+2t) for R2.
/// det = 14 t^2 + 12 t + 4 for both.
pub fn nonrealizable_block(epsilon: f64, n: usize, which: BlockChoice) -> Result<GaussianDistribution> {
    check_eps(epsilon)?;
    if n < 1 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    let t = epsilon / n as f64;
    let load = match which {
        BlockChoice::R1 => [1.0 + t, 1.0 + 2.0 * t, 1.0 + 3.0 * t],
        BlockChoice::R2 => [1.0 + t, 1.0 + 3.0 * t, 1.0 + 2.0 * t],
    };
    let mut cov = SymMatrix::zero(3);
    for i in 0..3 {
        for j in i..3 {
            let v = load[i] * load[j] + if i == j { 1.0 } else { 0.0 };
            cov.set(i, j, v);
        }
    }
    GaussianDistribution::zero_mean(cov)
}

/// Selects R1 (bit set) or R2 per block and the per-block eps/n scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockSpec {
    pub kind: BlockKind,
    pub bits: Vec<bool>,
    pub epsilon: f64,
    /// total block count used inside the per-block eps/n scaling
    pub n: usize,
}

/// Block-diagonal composition of independent 3-node blocks; block b occupies
/// variable indices 3b .. 3b+2.
pub fn compose_blocks(spec: &BlockSpec) -> Result<GaussianDistribution> {
    if spec.bits.is_empty() {
        return Err(Error::InvalidParameter("bits must be nonempty".into()));
    }
    check_eps(spec.epsilon)?;
    let ell = spec.bits.len();
    let mut cov = SymMatrix::zero(3 * ell);
    for (b, &bit) in spec.bits.iter().enumerate() {
        let which = if bit { BlockChoice::R1 } else { BlockChoice::R2 };
        let block = match spec.kind {
            BlockKind::Realizable => {
                realizable_block(spec.epsilon, spec.n, which, RealizableVariant::SharedNoise)?
            }
            BlockKind::NonRealizable => nonrealizable_block(spec.epsilon, spec.n, which)?,
        };
        for i in 0..3 {
            for j in i..3 {
                cov.set(3 * b + i, 3 * b + j, block.cov().get(i, j));
            }
        }
    }
    GaussianDistribution::zero_mean(cov)
}

/// Binary codebook with a guaranteed pairwise Hamming distance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CodeBook {
    pub n: usize,
    pub words: Vec<Vec<u8>>,
}

impl CodeBook {
    pub fn hamming(a: &[u8], b: &[u8]) -> usize {
        a.iter().zip(b).filter(|(x, y)| x != y).count()
    }
}

pub fn default_min_distance(n: usize) -> usize {
    n.div_ceil(5)
}

/// Greedy Gilbert-Varshamov-style construction: draw seeded-random candidate
/// words and keep those at distance >= min_distance from every kept word,
/// with a candidate budget of 64 * target_size draws.
pub fn gilbert_varshamov_code(
    n: usize,
    min_distance: usize,
    target_size: usize,
    seed: u64,
) -> Result<CodeBook> {
    if n < 5 {
        return Err(Error::InvalidParameter("codeword length must be >= 5".into()));
    }
    if target_size < 1 || (n < 64 && target_size as u128 > (1u128 << n)) {
        return Err(Error::InvalidParameter("target_size out of range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut words: Vec<Vec<u8>> = Vec::new();
    let budget = 64usize.saturating_mul(target_size);
    for _ in 0..budget {
        if words.len() >= target_size {
            break;
        }
        let word: Vec<u8> = (0..n).map(|_| (rng.next_u64() & 1) as u8).collect();
        let ok = words
            .iter()
            .all(|w| w != &word && CodeBook::hamming(w, &word) >= min_distance);
        if ok {
            words.push(word);
        }
    }
    if words.len() < target_size {
        return Err(Error::TargetUnreachable { achieved: words.len(), target: target_size });
    }
    Ok(CodeBook { n, words })
}

/// On-disk JSON form of a generated instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub kind: BlockKind,
    pub epsilon: f64,
    pub n: usize,
    pub bits: Vec<bool>,
    pub mean: Vec<f64>,
    pub cov: SymMatrix,
}

impl InstanceFile {
    pub fn from_spec(spec: &BlockSpec) -> Result<Self> {
        let dist = compose_blocks(spec)?;
        Ok(InstanceFile {
            kind: spec.kind,
            epsilon: spec.epsilon,
            n: spec.n,
            bits: spec.bits.clone(),
            mean: dist.mean().to_vec(),
            cov: dist.cov().clone(),
        })
    }

    pub fn distribution(&self) -> Result<GaussianDistribution> {
        GaussianDistribution::new(self.mean.clone(), self.cov.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gaussian_kl, gaussian_mi};
    use approx::assert_relative_eq;

    fn kl_pair(a: &GaussianDistribution, b: &GaussianDistribution) -> (f64, f64) {
        (gaussian_kl(a, b).unwrap(), gaussian_kl(b, a).unwrap())
    }

    #[test]
    fn mi_test_pair_constants() {
        let (h0, h1) = mi_test_pair(0.2).unwrap();
        assert_relative_eq!(gaussian_mi(&h1, &[0], &[1]).unwrap(), 0.5 * 1.2f64.ln(), epsilon = 1e-12);
        assert!(gaussian_mi(&h0, &[0], &[1]).unwrap().abs() < 1e-14);
        let (k01, k10) = kl_pair(&h0, &h1);
        assert_relative_eq!(k01, 0.1, epsilon = 1e-10);
        assert_relative_eq!(k10, 0.1, epsilon = 1e-10);
    }

    #[test]
    fn additive_pair_constants() {
        let (h0, h1) = additive_estimation_pair(0.1).unwrap();
        assert_relative_eq!(h0.cov().determinant(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(h1.cov().determinant(), 1.0, epsilon = 1e-12);
        let (k01, k10) = kl_pair(&h0, &h1);
        assert_relative_eq!(k01, 0.02, epsilon = 1e-10);
        assert_relative_eq!(k10, 0.02, epsilon = 1e-10);
        // MI gap is Theta(eps) and positive in the H0 direction
        let gap = gaussian_mi(&h0, &[0], &[1]).unwrap() - gaussian_mi(&h1, &[0], &[1]).unwrap();
        assert!(gap > 0.0);
    }

    #[test]
    fn realizable_block_constants() {
        // t = eps/n = 0.1
        let r1 = realizable_block(0.1, 1, BlockChoice::R1, RealizableVariant::SharedNoise).unwrap();
        let r2 = realizable_block(0.1, 1, BlockChoice::R2, RealizableVariant::SharedNoise).unwrap();
        assert_relative_eq!(r1.cov().determinant(), 3.0, epsilon = 1e-12);
        assert_relative_eq!(r2.cov().determinant(), 3.0, epsilon = 1e-12);
        let (k12, k21) = kl_pair(&r1, &r2);
        assert_relative_eq!(k12, 0.1, epsilon = 1e-10);
        assert_relative_eq!(k21, 0.1, epsilon = 1e-10);
        // I(X;Z) > eps/(16n)
        assert!(gaussian_mi(&r1, &[0], &[2]).unwrap() > 0.1 / 16.0);
    }

    #[test]
    fn nonrealizable_block_constants() {
        let t = 0.1f64;
        let r1 = nonrealizable_block(t, 1, BlockChoice::R1).unwrap();
        let r2 = nonrealizable_block(t, 1, BlockChoice::R2).unwrap();
        let det_pred = 14.0 * t * t + 12.0 * t + 4.0;
        assert_relative_eq!(r1.cov().determinant(), det_pred, epsilon = 1e-10);
        assert_relative_eq!(r2.cov().determinant(), det_pred, epsilon = 1e-10);
        let rational = (27.0 * t.powi(4) + 24.0 * t.powi(3) + 6.0 * t * t)
            / (28.0 * t * t + 24.0 * t + 8.0);
        let (k12, k21) = kl_pair(&r1, &r2);
        assert_relative_eq!(k12, rational, epsilon = 1e-10);
        assert_relative_eq!(k21, rational, epsilon = 1e-10);
        // MI ordering I(Y;Z) > I(X;Z) > I(X;Y) in R1
        let iyz = gaussian_mi(&r1, &[1], &[2]).unwrap();
        let ixz = gaussian_mi(&r1, &[0], &[2]).unwrap();
        let ixy = gaussian_mi(&r1, &[0], &[1]).unwrap();
        assert!(iyz > ixz && ixz > ixy);
    }

    #[test]
    fn chain_variant_structure() {
        let d = realizable_block(0.1, 1, BlockChoice::R1, RealizableVariant::Chain).unwrap();
        // true structure X - Z - Y: I(X;Z) > I(X;Y), edge (Y,Z) strongest
        let ixz = gaussian_mi(&d, &[0], &[2]).unwrap();
        let ixy = gaussian_mi(&d, &[0], &[1]).unwrap();
        let iyz = gaussian_mi(&d, &[1], &[2]).unwrap();
        assert!(iyz > ixz && ixz > ixy);
        // X and Y conditionally independent given Z
        assert!(crate::model::gaussian_cmi(&d, &[0], &[1], &[2]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn compose_identical_bits_zero_kl() {
        let a = BlockSpec { kind: BlockKind::Realizable, bits: vec![true, false], epsilon: 0.2, n: 2 };
        let b = a.clone();
        let da = compose_blocks(&a).unwrap();
        let db = compose_blocks(&b).unwrap();
        assert!(gaussian_kl(&da, &db).unwrap().abs() < 1e-12);
    }

    #[test]
    fn compose_kl_additivity_and_block_independence() {
        // 3 realizable blocks, eps/n = 0.1, bits differ in 2 blocks -> KL = 0.2
        let a = BlockSpec { kind: BlockKind::Realizable, bits: vec![true, true, false], epsilon: 0.3, n: 3 };
        let b = BlockSpec { kind: BlockKind::Realizable, bits: vec![false, true, true], epsilon: 0.3, n: 3 };
        let da = compose_blocks(&a).unwrap();
        let db = compose_blocks(&b).unwrap();
        assert_relative_eq!(gaussian_kl(&da, &db).unwrap(), 0.2, epsilon = 1e-9);
        // cross-block MI is exactly 0
        assert!(gaussian_mi(&da, &[0, 1, 2], &[3, 4, 5]).unwrap().abs() < 1e-10);
    }

    #[test]
    fn gv_code_meets_distance() {
        let code = gilbert_varshamov_code(20, 4, 16, 7).unwrap();
        assert!(code.words.len() >= 16);
        for (i, a) in code.words.iter().enumerate() {
            for b in code.words.iter().skip(i + 1) {
                assert!(CodeBook::hamming(a, b) >= 4);
            }
        }
    }

    #[test]
    fn gv_distance_one_admits_all_words() {
        let code = gilbert_varshamov_code(5, 1, 32, 11).unwrap();
        assert_eq!(code.words.len(), 32);
        let mut sorted = code.words.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 32);
    }

    #[test]
    fn gv_unreachable_target_reports_achieved() {
        // distance n forces at most 2 words (a word and its complement)
        match gilbert_varshamov_code(8, 8, 10, 3) {
            Err(Error::TargetUnreachable { achieved, target }) => {
                assert!(achieved <= 2);
                assert_eq!(target, 10);
            }
            other => panic!("expected TargetUnreachable, got {other:?}"),
        }
    }

    #[test]
    fn pinned_constants_over_random_settings() {
        let mut rng = crate::linalg::NormalRng::new(2024);
        for _ in 0..50 {
            let eps = 0.05 + 0.9 * (rng.next_normal().abs() % 1.0).min(0.94);
            let n = 1 + ((rng.next_normal().abs() * 10.0) as usize % 6);
            let t = eps / n as f64;

            let r1 = realizable_block(eps, n, BlockChoice::R1, RealizableVariant::SharedNoise).unwrap();
            let r2 = realizable_block(eps, n, BlockChoice::R2, RealizableVariant::SharedNoise).unwrap();
            assert!((r1.cov().determinant() - 3.0).abs() < 1e-10);
            assert!((gaussian_kl(&r1, &r2).unwrap() - t).abs() < 1e-10);

            let n1 = nonrealizable_block(eps, n, BlockChoice::R1).unwrap();
            let n2 = nonrealizable_block(eps, n, BlockChoice::R2).unwrap();
            let det = 14.0 * t * t + 12.0 * t + 4.0;
            let rational = (27.0 * t.powi(4) + 24.0 * t.powi(3) + 6.0 * t * t)
                / (28.0 * t * t + 24.0 * t + 8.0);
            assert!((n1.cov().determinant() - det).abs() < 1e-10 * det);
            assert!((gaussian_kl(&n1, &n2).unwrap() - rational).abs() < 1e-10);

            let (h0, h1) = mi_test_pair(eps).unwrap();
            assert!((gaussian_kl(&h0, &h1).unwrap() - eps / 2.0).abs() < 1e-10);
            let (a0, a1) = additive_estimation_pair(eps).unwrap();
            assert!((gaussian_kl(&a0, &a1).unwrap() - 2.0 * eps * eps).abs() < 1e-10);
        }
    }

    #[test]
    fn instance_file_roundtrip() {
        let spec = BlockSpec { kind: BlockKind::NonRealizable, bits: vec![true], epsilon: 0.1, n: 1 };
        let inst = InstanceFile::from_spec(&spec).unwrap();
        let json = serde_json::to_string(&inst).unwrap();
        let back: InstanceFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back.cov.rows(), inst.cov.rows());
        back.distribution().unwrap();
    }
}
