//! Synthetic benchmark generator: contaminated Gaussian mixtures with a
//! shared sparse set of informative mean coordinates and two covariance
//! regimes (independent, or an equicorrelation matrix conjugated by a
//! random rotation).
//!
//! Cluster means have `q` shared informative coordinates drawn from
//! +-U(3, 6); every other coordinate is zero. Each observation is an
//! outlier with probability `pi`, in which case a full-length offset with
//! coordinates drawn from +-U(7, 13) is added to its cluster mean.

use std::collections::BTreeSet;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ArskError, Result};
use crate::model::DataMatrix;
use crate::rng::{derive_rng, stream};

/// Covariance regime of the mixture components.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CovarianceKind {
    #[default]
    #[serde(rename = "identity")]
    Identity,
    #[serde(rename = "rotated")]
    RotatedEquicorrelation,
}

/// Scenario parameters for one synthetic dataset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub k: usize,
    pub n_per_cluster: usize,
    pub p: usize,
    pub q: usize,
    pub pi: f64,
    pub covariance: CovarianceKind,
    pub seed: u64,
}

impl SimConfig {
    pub fn n(&self) -> usize {
        self.k * self.n_per_cluster
    }

    fn validate(&self) -> Result<()> {
        if self.k < 1 || self.n_per_cluster < 1 || self.n() < 2 {
            return Err(ArskError::InvalidParameter(
                "need k >= 1 clusters and at least 2 observations total".to_string(),
            ));
        }
        if self.p < 1 {
            return Err(ArskError::InvalidParameter("p must be >= 1".to_string()));
        }
        if self.q > self.p {
            return Err(ArskError::InvalidParameter(format!(
                "q = {} exceeds p = {}",
                self.q, self.p
            )));
        }
        if !(0.0..=1.0).contains(&self.pi) {
            return Err(ArskError::InvalidParameter(format!(
                "pi must be in [0, 1], got {}",
                self.pi
            )));
        }
        Ok(())
    }
}

/// A generated dataset with its ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct SimDataset {
    pub x: DataMatrix,
    /// 1-based true cluster ids.
    pub true_labels: Vec<usize>,
    pub outlier_flags: Vec<bool>,
    /// 0-based informative variable indices (shared across clusters).
    pub informative: BTreeSet<usize>,
    pub true_means: Array2<f64>,
    pub config: SimConfig,
}

fn signed_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let magnitude = rng.random_range(lo..hi);
    if rng.random::<bool>() {
        magnitude
    } else {
        -magnitude
    }
}

/// Cluster means: one shared informative index set of size `q`; each
/// informative entry of each cluster mean drawn independently from
/// +-U(3, 6); everything else zero.
pub fn gen_means(k: usize, p: usize, q: usize, seed: u64) -> Result<(Array2<f64>, BTreeSet<usize>)> {
    if q > p {
        return Err(ArskError::InvalidParameter(format!("q = {q} exceeds p = {p}")));
    }
    let mut rng = derive_rng(seed, stream::SIM_MEANS, 0);
    let mut indices: Vec<usize> = (0..p).collect();
    indices.shuffle(&mut rng);
    let informative: BTreeSet<usize> = indices.into_iter().take(q).collect();
    let mut means = Array2::zeros((k, p));
    for c in 0..k {
        for &j in &informative {
            means[[c, j]] = signed_uniform(&mut rng, 3.0, 6.0);
        }
    }
    Ok((means, informative))
}

/// Component covariance. Identity, or `Q R Q^T` with `R` the
/// equicorrelation matrix (unit diagonal, constant off-diagonal
/// `rho ~ U(0.1, 1)`) and `Q` a uniformly random orthogonal matrix.
///
/// `rho < 1` holds by construction of the draw, so `R` is always positive
/// definite for p >= 2.
pub fn gen_covariance(p: usize, kind: CovarianceKind, seed: u64) -> Array2<f64> {
    gen_covariance_with_rho(p, kind, seed).0
}

pub(crate) fn gen_covariance_with_rho(
    p: usize,
    kind: CovarianceKind,
    seed: u64,
) -> (Array2<f64>, f64) {
    match kind {
        CovarianceKind::Identity => (Array2::eye(p), 0.0),
        CovarianceKind::RotatedEquicorrelation => {
            let mut rng = derive_rng(seed, stream::SIM_COV, 0);
            let rho: f64 = rng.random_range(0.1..1.0);
            let q = random_orthogonal(p, &mut rng);
            let mut r = Array2::from_elem((p, p), rho);
            for j in 0..p {
                r[[j, j]] = 1.0;
            }
            let sigma = q.dot(&r).dot(&q.t());
            (sigma, rho)
        }
    }
}

/// Orthonormalization of a standard Gaussian matrix by modified
/// Gram-Schmidt. Normalizing by the (positive) column norm fixes the sign
/// convention, so the result is deterministic given the RNG.
fn random_orthogonal(p: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut a = Array2::zeros((p, p));
    for i in 0..p {
        for j in 0..p {
            a[[i, j]] = StandardNormal.sample(rng);
        }
    }
    for j in 0..p {
        for prev in 0..j {
            let dot: f64 = (0..p).map(|i| a[[i, j]] * a[[i, prev]]).sum();
            for i in 0..p {
                let v = a[[i, prev]];
                a[[i, j]] -= dot * v;
            }
        }
        let norm: f64 = (0..p).map(|i| a[[i, j]] * a[[i, j]]).sum::<f64>().sqrt();
        for i in 0..p {
            a[[i, j]] /= norm;
        }
    }
    a
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub(crate) fn cholesky(a: &Array2<f64>) -> Result<Array2<f64>> {
    let p = a.nrows();
    let mut l = Array2::zeros((p, p));
    for i in 0..p {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for t in 0..j {
                sum -= l[[i, t]] * l[[j, t]];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(ArskError::InvalidParameter(
                        "covariance matrix is not positive definite".to_string(),
                    ));
                }
                l[[i, j]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Ok(l)
}

/// Generate a full dataset with ground truth.
pub fn gen_dataset(cfg: &SimConfig) -> Result<SimDataset> {
    cfg.validate()?;
    let n = cfg.n();
    let p = cfg.p;
    let (means, informative) = gen_means(cfg.k, p, cfg.q, cfg.seed)?;
    let (sigma, _) = gen_covariance_with_rho(p, cfg.covariance, cfg.seed);
    let chol = match cfg.covariance {
        CovarianceKind::Identity => None,
        CovarianceKind::RotatedEquicorrelation => Some(cholesky(&sigma)?),
    };

    let mut rng = derive_rng(cfg.seed, stream::SIM_DRAW, 0);
    let mut x = Array2::zeros((n, p));
    let mut labels = Vec::with_capacity(n);
    let mut flags = Vec::with_capacity(n);
    let mut z = vec![0.0; p];

    for c in 0..cfg.k {
        for _ in 0..cfg.n_per_cluster {
            let i = labels.len();
            labels.push(c + 1);
            let outlier = rng.random::<f64>() < cfg.pi;
            flags.push(outlier);
            for zj in z.iter_mut() {
                *zj = StandardNormal.sample(&mut rng);
            }
            for j in 0..p {
                let noise = match &chol {
                    None => z[j],
                    Some(l) => (0..=j).map(|t| l[[j, t]] * z[t]).sum(),
                };
                x[[i, j]] = means[[c, j]] + noise;
            }
            if outlier {
                for j in 0..p {
                    x[[i, j]] += signed_uniform(&mut rng, 7.0, 13.0);
                }
            }
        }
    }

    Ok(SimDataset {
        x: DataMatrix::new(x)?,
        true_labels: labels,
        outlier_flags: flags,
        informative,
        true_means: means,
        config: *cfg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::WeightVector;
    use crate::wkmeans::{lloyd_weighted, KMeansOptions};

    fn config(p: usize, q: usize, pi: f64, cov: CovarianceKind, seed: u64) -> SimConfig {
        SimConfig {
            k: 3,
            n_per_cluster: 50,
            p,
            q,
            pi,
            covariance: cov,
            seed,
        }
    }

    #[test]
    fn gen_means_support_and_range() {
        let (means, informative) = gen_means(3, 50, 5, 42).unwrap();
        assert_eq!(informative.len(), 5);
        for c in 0..3 {
            for j in 0..50 {
                let v: f64 = means[[c, j]];
                if informative.contains(&j) {
                    assert!((3.0..=6.0).contains(&v.abs()), "entry {v}");
                } else {
                    assert_eq!(v, 0.0);
                }
            }
        }

        let (zero, empty) = gen_means(3, 10, 0, 1).unwrap();
        assert!(empty.is_empty());
        assert!(zero.iter().all(|&v| v == 0.0));

        let (dense, all) = gen_means(2, 6, 6, 2).unwrap();
        assert_eq!(all.len(), 6);
        assert!(dense.iter().all(|&v| (3.0..=6.0).contains(&v.abs())));

        assert!(gen_means(3, 5, 6, 3).is_err());
    }

    #[test]
    fn identity_covariance_is_exact() {
        let sigma = gen_covariance(7, CovarianceKind::Identity, 5);
        assert_eq!(sigma, Array2::<f64>::eye(7));
    }

    /// Cyclic Jacobi eigenvalue iteration for symmetric matrices; test-only
    /// oracle.
    fn jacobi_eigenvalues(m: &Array2<f64>) -> Vec<f64> {
        let n = m.nrows();
        let mut a = m.clone();
        for _ in 0..200 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[[i, j]] * a[[i, j]])
                .sum();
            if off < 1e-24 {
                break;
            }
            for pp in 0..n - 1 {
                for qq in pp + 1..n {
                    if a[[pp, qq]].abs() < 1e-300 {
                        continue;
                    }
                    let tau = (a[[qq, qq]] - a[[pp, pp]]) / (2.0 * a[[pp, qq]]);
                    let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    for i in 0..n {
                        let aip = a[[i, pp]];
                        let aiq = a[[i, qq]];
                        a[[i, pp]] = c * aip - s * aiq;
                        a[[i, qq]] = s * aip + c * aiq;
                    }
                    for j in 0..n {
                        let apj = a[[pp, j]];
                        let aqj = a[[qq, j]];
                        a[[pp, j]] = c * apj - s * aqj;
                        a[[qq, j]] = s * apj + c * aqj;
                    }
                }
            }
        }
        let mut eig: Vec<f64> = (0..n).map(|i| a[[i, i]]).collect();
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
        eig
    }

    #[test]
    fn rotated_covariance_matches_equicorrelation_spectrum() {
        let p = 24;
        let (sigma, rho) =
            gen_covariance_with_rho(p, CovarianceKind::RotatedEquicorrelation, 11);
        assert!((0.1..1.0).contains(&rho));
        for i in 0..p {
            for j in 0..p {
                assert!(
                    (sigma[[i, j]] - sigma[[j, i]]).abs() < 1e-10,
                    "asymmetry at ({i},{j})"
                );
            }
        }
        let eig = jacobi_eigenvalues(&sigma);
        assert!(eig.iter().all(|&v| v > 0.0), "not positive definite: {eig:?}");
        // Closed-form spectrum: 1 - rho with multiplicity p - 1, then
        // 1 + (p - 1) rho.
        for &v in &eig[..p - 1] {
            assert!((v - (1.0 - rho)).abs() < 1e-8, "small eigenvalue {v}");
        }
        let top = eig[p - 1];
        assert!((top - (1.0 + (p as f64 - 1.0) * rho)).abs() < 1e-8, "top {top}");
    }

    #[test]
    fn contamination_flag_extremes() {
        let clean = gen_dataset(&config(10, 3, 0.0, CovarianceKind::Identity, 7)).unwrap();
        assert!(clean.outlier_flags.iter().all(|&f| !f));
        let dirty = gen_dataset(&config(10, 3, 1.0, CovarianceKind::Identity, 7)).unwrap();
        assert!(dirty.outlier_flags.iter().all(|&f| f));
    }

    #[test]
    fn flagged_count_is_within_binomial_band() {
        // n = 150, pi = 0.1: mean 15, +-4 sigma band is [5, 27].
        let data = gen_dataset(&config(50, 5, 0.1, CovarianceKind::Identity, 99)).unwrap();
        assert_eq!(data.x.n(), 150);
        assert_eq!(data.x.p(), 50);
        let flagged = data.outlier_flags.iter().filter(|&&f| f).count();
        assert!((5..=27).contains(&flagged), "flagged = {flagged}");
    }

    #[test]
    fn generation_is_bit_identical_for_equal_configs() {
        let cfg = config(20, 4, 0.2, CovarianceKind::RotatedEquicorrelation, 123);
        let a = gen_dataset(&cfg).unwrap();
        let b = gen_dataset(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noise_columns_are_centered() {
        let data = gen_dataset(&config(40, 4, 0.0, CovarianceKind::Identity, 31)).unwrap();
        let n = data.x.n() as f64;
        for j in 0..40 {
            if data.informative.contains(&j) {
                continue;
            }
            let col = data.x.column(j);
            let mean = col.sum() / n;
            let sd = (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0))
                .sqrt();
            let se = sd / n.sqrt();
            assert!(mean.abs() <= 5.0 * se, "column {j}: mean {mean}, se {se}");
        }
    }

    #[test]
    fn clean_clusters_are_recoverable_by_plain_kmeans() {
        let mut total = 0.0;
        for seed in 0..5u64 {
            let data =
                gen_dataset(&config(50, 5, 0.0, CovarianceKind::Identity, 1000 + seed)).unwrap();
            let w = WeightVector::uniform(50);
            let opts = KMeansOptions {
                seed,
                restarts: 10,
                ..KMeansOptions::default()
            };
            let fit = lloyd_weighted(&data.x, &w, 3, &opts).unwrap();
            total += crate::metrics::cer(&data.true_labels, fit.model.labels()).unwrap();
        }
        let avg = total / 5.0;
        assert!(avg <= 0.15, "average CER {avg}");
    }
}
