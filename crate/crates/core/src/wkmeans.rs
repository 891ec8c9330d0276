//! Weighted Lloyd k-means on adjusted data, plus the trimmed k-means
//! baseline.
//!
//! `lloyd_weighted` scales each column of the adjusted data by its variable
//! weight and minimizes the within-cluster sum of squares of the scaled
//! matrix. Zero-weight columns contribute nothing to any distance, so they
//! are dropped from the inner loops and their center coordinates reported
//! as zero.

use std::collections::BTreeSet;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ArskError, Result};
use crate::model::{ClusterModel, DataMatrix, WeightVector};
use crate::rng::{derive_rng, stream};
use crate::util::{ceil_fraction, dist2};

/// Center initialization strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KMeansInit {
    /// D^2 sampling of initial centers (default).
    #[default]
    KMeansPlusPlus,
    /// Uniform random label assignment, centers from the partition means.
    RandomPartition,
}

/// Options for a k-means run.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansOptions {
    /// Independent restarts; the run with the lowest objective wins,
    /// ties broken by restart index.
    pub restarts: usize,
    /// Lloyd iteration cap per restart.
    pub max_iter: usize,
    /// Relative objective-change stopping threshold.
    pub tol: f64,
    pub init: KMeansInit,
    pub seed: u64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            restarts: 20,
            max_iter: 100,
            tol: 1e-8,
            init: KMeansInit::KMeansPlusPlus,
            seed: 0,
        }
    }
}

impl KMeansOptions {
    fn validate(&self) -> Result<()> {
        if self.restarts < 1 {
            return Err(ArskError::InvalidParameter(
                "restarts must be >= 1".to_string(),
            ));
        }
        if self.max_iter < 1 {
            return Err(ArskError::InvalidParameter(
                "max_iter must be >= 1".to_string(),
            ));
        }
        if !(self.tol > 0.0) {
            return Err(ArskError::InvalidParameter(
                "tol must be positive".to_string(),
            ));
        }
        Ok(())
    }
}

/// A k-means solution with its objective diagnostics.
#[derive(Clone, Debug)]
pub struct KMeansFit {
    pub model: ClusterModel,
    /// Within-cluster sum of squares of the scaled data.
    pub objective: f64,
    pub iterations: usize,
    /// Objective after each Lloyd iteration of the winning restart;
    /// nonincreasing.
    pub objective_trace: Vec<f64>,
}

/// A trimmed k-means solution. Trimmed points keep their nearest-center
/// label in `model`; the trimmed set is reported separately.
#[derive(Clone, Debug)]
pub struct TrimmedKMeansFit {
    pub model: ClusterModel,
    /// 0-based indices of the trimmed points.
    pub outliers: BTreeSet<usize>,
    /// Within-cluster sum of squares over retained points.
    pub objective: f64,
    pub iterations: usize,
}

// Internal Lloyd state on a flat row-major matrix.
struct Flat {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl Flat {
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }
}

struct LloydRun {
    labels: Vec<usize>, // 0-based
    centers: Vec<f64>,  // k x d flat
    objective: f64,
    iterations: usize,
    trace: Vec<f64>,
}

fn assign_labels(flat: &Flat, centers: &[f64], k: usize, labels: &mut [usize]) -> bool {
    let d = flat.d;
    let mut changed = false;
    for i in 0..flat.n {
        let x = flat.row(i);
        let mut best = 0usize;
        let mut best_d = dist2(x, &centers[0..d]);
        for c in 1..k {
            let dc = dist2(x, &centers[c * d..(c + 1) * d]);
            // Strict comparison keeps the lowest cluster id on ties.
            if dc < best_d {
                best_d = dc;
                best = c;
            }
        }
        if labels[i] != best {
            labels[i] = best;
            changed = true;
        }
    }
    changed
}

fn recompute_centers(flat: &Flat, labels: &[usize], k: usize, centers: &mut [f64]) {
    let d = flat.d;
    centers.fill(0.0);
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        let x = flat.row(i);
        let c = &mut centers[l * d..(l + 1) * d];
        for (cv, xv) in c.iter_mut().zip(x) {
            *cv += xv;
        }
    }
    for l in 0..k {
        if counts[l] > 0 {
            let inv = 1.0 / counts[l] as f64;
            for cv in &mut centers[l * d..(l + 1) * d] {
                *cv *= inv;
            }
        }
    }
}

fn objective(flat: &Flat, labels: &[usize], centers: &[f64]) -> f64 {
    let d = flat.d;
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| dist2(flat.row(i), &centers[l * d..(l + 1) * d]))
        .sum()
}

/// Reseed each empty cluster at the point farthest from its assigned center.
///
/// Points that are the sole member of their cluster are not eligible to
/// move (stealing them would just empty another cluster); with n >= k a
/// donor with at least two members always exists.
fn repair_empty_raw(flat: &Flat, labels: &mut [usize], centers: &mut [f64], k: usize) {
    let d = flat.d;
    loop {
        let mut counts = vec![0usize; k];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let mut far_i = usize::MAX;
        let mut far_d = f64::NEG_INFINITY;
        for (i, &l) in labels.iter().enumerate() {
            if counts[l] < 2 {
                continue;
            }
            let dd = dist2(flat.row(i), &centers[l * d..(l + 1) * d]);
            if dd > far_d {
                far_d = dd;
                far_i = i;
            }
        }
        debug_assert_ne!(far_i, usize::MAX, "no donor cluster with >= 2 members");
        centers[empty * d..(empty + 1) * d].copy_from_slice(flat.row(far_i));
        labels[far_i] = empty;
    }
}

fn init_plus_plus(flat: &Flat, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = flat.d;
    let mut centers = vec![0.0; k * d];
    let first = rng.random_range(0..flat.n);
    centers[0..d].copy_from_slice(flat.row(first));
    let mut d2: Vec<f64> = (0..flat.n)
        .map(|i| dist2(flat.row(i), &centers[0..d]))
        .collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = flat.n - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if u < acc {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..flat.n)
        };
        centers[c * d..(c + 1) * d].copy_from_slice(flat.row(idx));
        for (i, v) in d2.iter_mut().enumerate() {
            let dd = dist2(flat.row(i), &centers[c * d..(c + 1) * d]);
            if dd < *v {
                *v = dd;
            }
        }
    }
    centers
}

fn init_random_partition(flat: &Flat, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = flat.d;
    let labels: Vec<usize> = (0..flat.n).map(|_| rng.random_range(0..k)).collect();
    let mut centers = vec![0.0; k * d];
    recompute_centers(flat, &labels, k, &mut centers);
    // A cluster the random draw missed gets seeded at a random point.
    let mut counts = vec![0usize; k];
    for &l in &labels {
        counts[l] += 1;
    }
    for (c, &cnt) in counts.iter().enumerate() {
        if cnt == 0 {
            let i = rng.random_range(0..flat.n);
            centers[c * d..(c + 1) * d].copy_from_slice(flat.row(i));
        }
    }
    centers
}

fn lloyd_single(flat: &Flat, k: usize, opts: &KMeansOptions, rng: &mut ChaCha8Rng) -> LloydRun {
    let mut centers = match opts.init {
        KMeansInit::KMeansPlusPlus => init_plus_plus(flat, k, rng),
        KMeansInit::RandomPartition => init_random_partition(flat, k, rng),
    };
    let mut labels = vec![0usize; flat.n];
    assign_labels(flat, &centers, k, &mut labels);
    repair_empty_raw(flat, &mut labels, &mut centers, k);
    recompute_centers(flat, &labels, k, &mut centers);
    let mut obj = objective(flat, &labels, &centers);
    let mut trace = vec![obj];
    let mut iterations = 1;

    for _ in 1..opts.max_iter {
        let changed = assign_labels(flat, &centers, k, &mut labels);
        repair_empty_raw(flat, &mut labels, &mut centers, k);
        recompute_centers(flat, &labels, k, &mut centers);
        let new_obj = objective(flat, &labels, &centers);
        trace.push(new_obj);
        iterations += 1;
        let drop = obj - new_obj;
        obj = new_obj;
        if !changed || drop <= opts.tol * obj.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }

    LloydRun {
        labels,
        centers,
        objective: obj,
        iterations,
        trace,
    }
}

fn lloyd_restarts(flat: &Flat, k: usize, opts: &KMeansOptions) -> LloydRun {
    let mut best: Option<LloydRun> = None;
    for r in 0..opts.restarts {
        let mut rng = derive_rng(opts.seed, stream::KMEANS_RESTART, r as u64);
        let run = lloyd_single(flat, k, opts, &mut rng);
        // Strict comparison keeps the earliest restart on ties, so serial
        // and concurrent schedules agree.
        if best.as_ref().is_none_or(|b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    best.expect("restarts >= 1")
}

/// Weighted Lloyd k-means: scales `x_adj` columns by `weights`, then
/// minimizes within-cluster sum of squares of the scaled matrix over
/// `opts.restarts` independent runs.
pub fn lloyd_weighted(
    x_adj: &DataMatrix,
    weights: &WeightVector,
    k: usize,
    opts: &KMeansOptions,
) -> Result<KMeansFit> {
    opts.validate()?;
    let n = x_adj.n();
    let p = x_adj.p();
    if weights.p() != p {
        return Err(ArskError::DimensionMismatch(format!(
            "weights length {} does not match p = {p}",
            weights.p()
        )));
    }
    if k < 1 || k > n {
        return Err(ArskError::InvalidParameter(format!(
            "k must be in 1..=n, got k = {k}, n = {n}"
        )));
    }
    let w = weights.as_slice();
    if w.iter().all(|&v| v == 0.0) {
        return Err(ArskError::DegenerateWeights);
    }

    let active: Vec<usize> = (0..p).filter(|&j| w[j] > 0.0).collect();
    let d = active.len();
    let mut data = vec![0.0; n * d];
    let values = x_adj.values();
    for i in 0..n {
        for (jj, &j) in active.iter().enumerate() {
            data[i * d + jj] = w[j] * values[[i, j]];
        }
    }
    let flat = Flat { data, n, d };

    let run = lloyd_restarts(&flat, k, opts);

    // Expand centers back to all p columns; zero-weight columns of the
    // scaled matrix are identically zero, so their means are zero.
    let mut centers = Array2::zeros((k, p));
    for c in 0..k {
        for (jj, &j) in active.iter().enumerate() {
            centers[[c, j]] = run.centers[c * d + jj];
        }
    }
    let labels: Vec<usize> = run.labels.iter().map(|&l| l + 1).collect();
    Ok(KMeansFit {
        model: ClusterModel::new(labels, k, centers)?,
        objective: run.objective,
        iterations: run.iterations,
        objective_trace: run.trace,
    })
}

/// Trimmed k-means: standard k-means, then alternately trim the
/// `ceil(alpha * n)` points farthest from their assigned centers, recompute
/// centers on the retained points, and refresh assignments, until the
/// trimmed set and labels stabilize.
pub fn trimmed_kmeans(
    x: &DataMatrix,
    k: usize,
    alpha: f64,
    opts: &KMeansOptions,
) -> Result<TrimmedKMeansFit> {
    opts.validate()?;
    if !(0.0..1.0).contains(&alpha) {
        return Err(ArskError::InvalidParameter(format!(
            "alpha must be in [0, 1), got {alpha}"
        )));
    }
    let n = x.n();
    let p = x.p();
    let m = ceil_fraction(alpha, n);
    let retained = n - m;
    if k < 1 || k > retained {
        return Err(ArskError::InvalidParameter(format!(
            "k must be in 1..={retained} retained points, got {k}"
        )));
    }

    let flat = Flat {
        data: x.values().iter().copied().collect(),
        n,
        d: p,
    };
    let base = lloyd_restarts(&flat, k, opts);
    let mut centers = base.centers;
    let mut labels = base.labels;
    let mut trimmed: BTreeSet<usize> = BTreeSet::new();
    let mut iterations = base.iterations;

    for _ in 0..opts.max_iter {
        iterations += 1;
        // Assign every point (trimmed ones included) to its nearest center.
        assign_labels(&flat, &centers, k, &mut labels);
        // Trim the m farthest points, ties broken by index.
        let mut dist: Vec<(f64, usize)> = (0..n)
            .map(|i| {
                (
                    dist2(flat.row(i), &centers[labels[i] * p..(labels[i] + 1) * p]),
                    i,
                )
            })
            .collect();
        dist.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let new_trimmed: BTreeSet<usize> = dist.iter().take(m).map(|&(_, i)| i).collect();

        // Recompute centers from retained points only.
        let mut sums = vec![0.0; k * p];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            if new_trimmed.contains(&i) {
                continue;
            }
            counts[l] += 1;
            for (s, v) in sums[l * p..(l + 1) * p].iter_mut().zip(flat.row(i)) {
                *s += v;
            }
        }
        for l in 0..k {
            if counts[l] > 0 {
                let inv = 1.0 / counts[l] as f64;
                for (c, s) in centers[l * p..(l + 1) * p].iter_mut().zip(&sums[l * p..]) {
                    *c = s * inv;
                }
            } else {
                // A cluster lost all retained members: reseed it at the
                // farthest retained point.
                let far = (0..n)
                    .filter(|i| !new_trimmed.contains(i) && counts[labels[*i]] > 1)
                    .max_by(|&a, &b| {
                        let da = dist2(flat.row(a), &centers[labels[a] * p..(labels[a] + 1) * p]);
                        let db = dist2(flat.row(b), &centers[labels[b] * p..(labels[b] + 1) * p]);
                        da.partial_cmp(&db).unwrap().then(b.cmp(&a))
                    })
                    .expect("k <= retained points");
                centers[l * p..(l + 1) * p].copy_from_slice(flat.row(far));
                counts[labels[far]] -= 1;
                labels[far] = l;
                counts[l] = 1;
            }
        }

        let stable = new_trimmed == trimmed;
        trimmed = new_trimmed;
        if stable {
            // One more assignment pass to confirm labels are stable too.
            let mut check = labels.clone();
            let changed = assign_labels(&flat, &centers, k, &mut check);
            if !changed {
                break;
            }
        }
    }

    repair_empty_raw(&flat, &mut labels, &mut centers, k);
    let obj: f64 = labels
        .iter()
        .enumerate()
        .filter(|(i, _)| !trimmed.contains(i))
        .map(|(i, &l)| dist2(flat.row(i), &centers[l * p..(l + 1) * p]))
        .sum();

    let mut center_arr = Array2::zeros((k, p));
    for c in 0..k {
        for j in 0..p {
            center_arr[[c, j]] = centers[c * p + j];
        }
    }
    let labels: Vec<usize> = labels.iter().map(|&l| l + 1).collect();
    Ok(TrimmedKMeansFit {
        model: ClusterModel::new(labels, k, center_arr)?,
        outliers: trimmed,
        objective: obj,
        iterations,
    })
}

/// Reseed each empty cluster's center at the point farthest from its
/// assigned center and relabel that point; a no-op for models whose
/// clusters are all nonempty.
pub fn empty_cluster_repair(model: &ClusterModel, x_adj: &DataMatrix) -> Result<ClusterModel> {
    let n = x_adj.n();
    let p = x_adj.p();
    if model.n() != n || model.centers().ncols() != p {
        return Err(ArskError::DimensionMismatch(
            "model shape does not match data".to_string(),
        ));
    }
    let k = model.k();
    let flat = Flat {
        data: x_adj.values().iter().copied().collect(),
        n,
        d: p,
    };
    let mut labels: Vec<usize> = model.labels().iter().map(|&l| l - 1).collect();
    let mut centers: Vec<f64> = model.centers().iter().copied().collect();
    repair_empty_raw(&flat, &mut labels, &mut centers, k);
    let mut center_arr = Array2::zeros((k, p));
    for c in 0..k {
        for j in 0..p {
            center_arr[[c, j]] = centers[c * p + j];
        }
    }
    ClusterModel::new(labels.iter().map(|&l| l + 1).collect(), k, center_arr)
}
