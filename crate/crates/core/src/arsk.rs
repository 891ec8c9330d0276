//! The outer block-coordinate loop: alternate (1) weighted k-means on the
//! error-adjusted data, (2) an inner alternating update of the error matrix
//! against cluster means in the weighted space, (3) restoration of the
//! error matrix to the raw scale, and (4) a closed-form thresholded update
//! of the variable weights from the per-variable robust between-cluster
//! sums of squares.
//!
//! The loop stops when the relative L1 change of the weight vector falls
//! below `outer_tol`. The full objective is recorded once per outer
//! iteration for diagnostics; the restoration step makes the composite
//! sequence non-monotone, so the trace is reported, not asserted.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{ArskError, Result};
use crate::model::{ClusterModel, DataMatrix, ErrorMatrix, FitResult, PenaltySpec, WeightVector};
use crate::rng::{derive_seed, stream};
use crate::threshold::{group_threshold_factor, penalty_value_raw, scalar_threshold};
use crate::util::{ceil_fraction, l2_norm};
use crate::wkmeans::{lloyd_weighted, KMeansOptions};

/// How the weighted-space error matrix is mapped back to the raw scale.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestoreMode {
    /// Divide column j by `sqrt(w_j)` (pseudocode convention, default).
    #[default]
    Sqrt,
    /// Divide column j by `w_j` (prose convention).
    Linear,
}

/// Options controlling a full fit.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ArskOptions {
    /// Group penalty on error rows (lambda1 controls robustness).
    pub penalty_e: PenaltySpec,
    /// Scalar penalty on variable weights (lambda2 controls sparsity).
    pub penalty_w: PenaltySpec,
    pub k: usize,
    /// Relative L1 weight-change threshold for outer convergence.
    pub outer_tol: f64,
    pub max_outer_iter: usize,
    /// Relative objective-change threshold for the inner error update.
    pub inner_e_tol: f64,
    pub max_inner_e_iter: usize,
    /// Fraction of rows (farthest from the grand mean) whose error rows are
    /// initialized to the data rows themselves.
    pub init_error_fraction: f64,
    pub restore_mode: RestoreMode,
    pub kmeans: KMeansOptions,
    pub seed: u64,
}

impl ArskOptions {
    pub fn new(k: usize, penalty_e: PenaltySpec, penalty_w: PenaltySpec) -> Self {
        Self {
            penalty_e,
            penalty_w,
            k,
            outer_tol: 1e-4,
            max_outer_iter: 50,
            inner_e_tol: 1e-6,
            max_inner_e_iter: 100,
            init_error_fraction: 0.8,
            restore_mode: RestoreMode::Sqrt,
            kmeans: KMeansOptions::default(),
            seed: 0,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.k < 1 || self.k > n {
            return Err(ArskError::InvalidParameter(format!(
                "k must be in 1..=n, got k = {}, n = {n}",
                self.k
            )));
        }
        if !(self.outer_tol > 0.0) || !(self.inner_e_tol > 0.0) {
            return Err(ArskError::InvalidParameter(
                "tolerances must be positive".to_string(),
            ));
        }
        if self.max_outer_iter < 1 || self.max_inner_e_iter < 1 {
            return Err(ArskError::InvalidParameter(
                "iteration caps must be >= 1".to_string(),
            ));
        }
        if !(0.0..=1.0).contains(&self.init_error_fraction) {
            return Err(ArskError::InvalidParameter(format!(
                "init_error_fraction must be in [0, 1], got {}",
                self.init_error_fraction
            )));
        }
        Ok(())
    }
}

/// Between-cluster sum of squares of one variable: total sum of squares
/// around the column mean minus the within-cluster sums of squares around
/// the cluster means. Analytically nonnegative.
pub fn bcss(x_col: &[f64], model: &ClusterModel) -> f64 {
    bcss_labels(x_col, model.labels(), model.k())
}

/// `labels` are 1-based cluster ids.
fn bcss_labels(x_col: &[f64], labels: &[usize], k: usize) -> f64 {
    debug_assert_eq!(x_col.len(), labels.len());
    let n = x_col.len();
    let mean = x_col.iter().sum::<f64>() / n as f64;
    let mut cluster_sum = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (&v, &l) in x_col.iter().zip(labels) {
        cluster_sum[l - 1] += v;
        counts[l - 1] += 1;
    }
    let cluster_mean: Vec<f64> = cluster_sum
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    let mut tss = 0.0;
    let mut wss = 0.0;
    for (&v, &l) in x_col.iter().zip(labels) {
        let d = v - mean;
        tss += d * d;
        let dk = v - cluster_mean[l - 1];
        wss += dk * dk;
    }
    tss - wss
}

/// Between-cluster sum of squares of the error-adjusted variable
/// `x_col - e_col`.
pub fn robust_bcss(x_col: &[f64], e_col: &[f64], model: &ClusterModel) -> f64 {
    debug_assert_eq!(x_col.len(), e_col.len());
    let adjusted: Vec<f64> = x_col.iter().zip(e_col).map(|(x, e)| x - e).collect();
    bcss(&adjusted, model)
}

/// Robust BCSS of every column of `x - e` in two row passes.
pub(crate) fn robust_bcss_all(
    x: &Array2<f64>,
    e: &Array2<f64>,
    labels: &[usize],
    k: usize,
) -> Vec<f64> {
    let (n, p) = x.dim();
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l - 1] += 1;
    }
    let mut mean = vec![0.0; p];
    let mut cmean = vec![0.0; k * p];
    for i in 0..n {
        let l = labels[i] - 1;
        for j in 0..p {
            let v = x[[i, j]] - e[[i, j]];
            mean[j] += v;
            cmean[l * p + j] += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    for l in 0..k {
        let inv = 1.0 / counts[l] as f64;
        for m in &mut cmean[l * p..(l + 1) * p] {
            *m *= inv;
        }
    }
    let mut q = vec![0.0; p];
    for i in 0..n {
        let l = labels[i] - 1;
        for j in 0..p {
            let v = x[[i, j]] - e[[i, j]];
            let d = v - mean[j];
            let dk = v - cmean[l * p + j];
            q[j] += d * d - dk * dk;
        }
    }
    q
}

/// The full objective: weighted robust BCSS minus the error-row group
/// penalties minus the weight penalties and their quadratic term.
///
/// `weights` may be the degenerate all-zero vector here; the first and
/// third sums then vanish.
pub fn full_objective(
    x: &DataMatrix,
    model: &ClusterModel,
    errors: &ErrorMatrix,
    weights: &[f64],
    penalty_e: &PenaltySpec,
    penalty_w: &PenaltySpec,
) -> f64 {
    let q = robust_bcss_all(x.values(), errors.values(), model.labels(), model.k());
    let fit_term: f64 = q.iter().zip(weights).map(|(qj, wj)| wj * qj).sum();
    let e_penalty: f64 = errors
        .row_norms()
        .iter()
        .map(|&nm| penalty_value_raw(penalty_e, nm))
        .sum();
    let w_penalty: f64 = weights
        .iter()
        .map(|&wj| penalty_value_raw(penalty_w, wj) + 0.5 * wj * wj)
        .sum();
    fit_term - e_penalty - w_penalty
}

/// Initialize the error matrix: the `ceil(fraction * n)` rows farthest from
/// the grand mean are copied from the data, all other rows are zero. Ties
/// in distance break by row index.
pub fn init_error_matrix(x: &DataMatrix, fraction: f64) -> Result<ErrorMatrix> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(ArskError::InvalidParameter(format!(
            "fraction must be in [0, 1], got {fraction}"
        )));
    }
    let n = x.n();
    let p = x.p();
    let center = x.column_means();
    let mut dist: Vec<(f64, usize)> = (0..n)
        .map(|i| {
            let d2: f64 = x
                .row(i)
                .iter()
                .zip(&center)
                .map(|(v, c)| (v - c) * (v - c))
                .sum();
            (d2, i)
        })
        .collect();
    dist.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let m = ceil_fraction(fraction, n);
    let mut e = Array2::zeros((n, p));
    for &(_, i) in dist.iter().take(m) {
        for j in 0..p {
            e[[i, j]] = x.values()[[i, j]];
        }
    }
    ErrorMatrix::new(e)
}

/// Convergence diagnostics of the inner error update.
#[derive(Clone, Debug)]
pub struct EUpdateDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    /// Inner objective after every iteration; nonincreasing.
    pub objective_trace: Vec<f64>,
}

/// Inner error update in the weighted space.
///
/// Works on the weighted data `Y_ij = w_j * X_ij` with the weighted-space
/// error state seeded at `w_j * E_prev_ij`, and alternates (a) cluster
/// means of `Y - E*` and (b) a group threshold of each row residual
/// `Y_i - mu*_k(i)`, until the penalized least-squares objective stops
/// moving. The previous error therefore enters through the means: the
/// first iteration's means are exactly those of the adjusted weighted
/// matrix the clustering step ran on, and later iterations refine them
/// from the current error state.
///
/// Zero-weight columns contribute nothing to the thresholded norms, but an
/// outlying row is outlying in every coordinate: rows the threshold keeps
/// active absorb their residual in zero-weight columns too, at raw scale
/// and with the same shrinkage factor. Restoration later divides those
/// columns by one, so they pass through unchanged.
///
/// The returned matrix lives in the weighted space;
/// [`restore_error_matrix`] maps it back.
pub fn update_error_matrix(
    x: &DataMatrix,
    model: &ClusterModel,
    weights: &WeightVector,
    e_prev: &ErrorMatrix,
    penalty_e: &PenaltySpec,
    inner_tol: f64,
    max_iter: usize,
) -> Result<(ErrorMatrix, EUpdateDiagnostics)> {
    let n = x.n();
    let p = x.p();
    if model.n() != n || weights.p() != p || e_prev.n() != n || e_prev.p() != p {
        return Err(ArskError::DimensionMismatch(
            "update_error_matrix inputs disagree in shape".to_string(),
        ));
    }
    if !(inner_tol > 0.0) || max_iter < 1 {
        return Err(ArskError::InvalidParameter(
            "inner tolerance must be positive and max_iter >= 1".to_string(),
        ));
    }
    let w = weights.as_slice();
    let active: Vec<usize> = (0..p).filter(|&j| w[j] > 0.0).collect();
    let d = active.len();
    let k = model.k();
    let labels = model.labels();
    let counts = model.cluster_sizes();

    // Weighted data and the weighted image of the previous error state,
    // restricted to active columns; zero-weight columns ride along at raw
    // scale and share the active rows' shrinkage factors.
    let inactive: Vec<usize> = (0..p).filter(|&j| w[j] == 0.0).collect();
    let di = inactive.len();
    let mut star = vec![0.0; n * d];
    let mut e_star = vec![0.0; n * d];
    let mut raw = vec![0.0; n * di];
    let mut e_raw = vec![0.0; n * di];
    for i in 0..n {
        for (jj, &j) in active.iter().enumerate() {
            star[i * d + jj] = w[j] * x.values()[[i, j]];
            e_star[i * d + jj] = w[j] * e_prev.values()[[i, j]];
        }
        for (jj, &j) in inactive.iter().enumerate() {
            raw[i * di + jj] = x.values()[[i, j]];
            e_raw[i * di + jj] = e_prev.values()[[i, j]];
        }
    }
    let mut mu = vec![0.0; k * d];
    let mut mu_raw = vec![0.0; k * di];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..max_iter {
        iterations += 1;
        // (a) cluster means of X* - E*, and of the raw inactive part.
        mu.fill(0.0);
        mu_raw.fill(0.0);
        for i in 0..n {
            let l = labels[i] - 1;
            for jj in 0..d {
                mu[l * d + jj] += star[i * d + jj] - e_star[i * d + jj];
            }
            for jj in 0..di {
                mu_raw[l * di + jj] += raw[i * di + jj] - e_raw[i * di + jj];
            }
        }
        for l in 0..k {
            let inv = 1.0 / counts[l] as f64;
            for m in &mut mu[l * d..(l + 1) * d] {
                *m *= inv;
            }
            for m in &mut mu_raw[l * di..(l + 1) * di] {
                *m *= inv;
            }
        }
        // (b) group threshold of each row residual, tracking the objective
        // evaluated at the means just used.
        let mut obj = 0.0;
        for i in 0..n {
            let l = labels[i] - 1;
            let mut norm2 = 0.0;
            for jj in 0..d {
                let z = star[i * d + jj] - mu[l * d + jj];
                e_star[i * d + jj] = z;
                norm2 += z * z;
            }
            let znorm = norm2.sqrt();
            let factor = group_threshold_factor(penalty_e, znorm);
            let row = &mut e_star[i * d..(i + 1) * d];
            if factor == 0.0 {
                row.fill(0.0);
            } else if factor != 1.0 {
                for v in row.iter_mut() {
                    *v *= factor;
                }
            }
            for jj in 0..di {
                e_raw[i * di + jj] = if factor == 0.0 {
                    0.0
                } else {
                    factor * (raw[i * di + jj] - mu_raw[l * di + jj])
                };
            }
            // Residual after thresholding is (1 - factor) * z.
            let resid = (1.0 - factor) * znorm;
            obj += 0.5 * resid * resid + penalty_value_raw(penalty_e, factor * znorm);
        }
        let done = trace.last().is_some_and(|&prev: &f64| {
            (prev - obj).abs() <= inner_tol * prev.abs().max(f64::MIN_POSITIVE)
        });
        trace.push(obj);
        if done {
            converged = true;
            break;
        }
    }

    let mut e_full = Array2::zeros((n, p));
    for i in 0..n {
        for (jj, &j) in active.iter().enumerate() {
            e_full[[i, j]] = e_star[i * d + jj];
        }
        for (jj, &j) in inactive.iter().enumerate() {
            e_full[[i, j]] = e_raw[i * di + jj];
        }
    }
    Ok((
        ErrorMatrix::new(e_full)?,
        EUpdateDiagnostics {
            iterations,
            converged,
            objective_trace: trace,
        },
    ))
}

/// Map a weighted-space error matrix back to the raw scale: column j is
/// divided by `sqrt(w_j)` (or by `w_j` in linear mode); zero-weight columns
/// divide by one instead of zero and pass through unchanged.
pub fn restore_error_matrix(
    e_weighted: &ErrorMatrix,
    weights: &WeightVector,
    mode: RestoreMode,
) -> Result<ErrorMatrix> {
    let p = e_weighted.p();
    if weights.p() != p {
        return Err(ArskError::DimensionMismatch(format!(
            "weights length {} does not match p = {p}",
            weights.p()
        )));
    }
    let mut e = e_weighted.values().clone();
    for (j, &wj) in weights.as_slice().iter().enumerate() {
        if wj == 0.0 {
            continue;
        }
        let divisor = match mode {
            RestoreMode::Sqrt => wj.sqrt(),
            RestoreMode::Linear => wj,
        };
        for i in 0..e.nrows() {
            e[[i, j]] /= divisor;
        }
    }
    ErrorMatrix::new(e)
}

/// Closed-form weight update: threshold each robust BCSS value and project
/// onto the unit sphere. Tiny negative inputs (rounding of an analytically
/// nonnegative quantity) are clipped to zero before thresholding.
pub fn update_weights(q_r: &[f64], penalty_w: &PenaltySpec) -> Result<WeightVector> {
    if q_r.is_empty() {
        return Err(ArskError::InvalidParameter(
            "empty robust BCSS vector".to_string(),
        ));
    }
    let thresholded: Vec<f64> = q_r
        .iter()
        .map(|&q| {
            debug_assert!(q >= -1e-9, "robust BCSS below rounding floor: {q}");
            scalar_threshold(penalty_w, q.max(0.0))
        })
        .collect();
    let norm = l2_norm(&thresholded);
    if norm == 0.0 {
        return Err(ArskError::DegenerateWeights);
    }
    let weights: Vec<f64> = thresholded.iter().map(|s| s / norm).collect();
    WeightVector::new(weights)
}

/// Run the full outer loop.
pub fn fit(x: &DataMatrix, opts: &ArskOptions) -> Result<FitResult> {
    let n = x.n();
    let p = x.p();
    opts.validate(n)?;

    let mut weights = WeightVector::uniform(p);
    let mut errors = init_error_matrix(x, opts.init_error_fraction)?;
    let mut model: Option<ClusterModel> = None;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for r in 0..opts.max_outer_iter {
        iterations = r + 1;

        // Cluster the weighted adjusted data.
        let x_adj = DataMatrix::new(x.values() - errors.values())?;
        let km_opts = KMeansOptions {
            seed: derive_seed(opts.seed, stream::KMEANS_OUTER, r as u64),
            ..opts.kmeans
        };
        let km = lloyd_weighted(&x_adj, &weights, opts.k, &km_opts)?;

        // Inner error update in the weighted space, then restore.
        let (e_weighted, _diag) = update_error_matrix(
            x,
            &km.model,
            &weights,
            &errors,
            &opts.penalty_e,
            opts.inner_e_tol,
            opts.max_inner_e_iter,
        )?;
        errors = restore_error_matrix(&e_weighted, &weights, opts.restore_mode)?;

        // Robust BCSS per variable on the restored state, then the weight
        // update.
        let q = robust_bcss_all(x.values(), errors.values(), km.model.labels(), opts.k);
        let new_weights = update_weights(&q, &opts.penalty_w)?;

        trace.push(full_objective(
            x,
            &km.model,
            &errors,
            new_weights.as_slice(),
            &opts.penalty_e,
            &opts.penalty_w,
        ));

        let change: f64 = new_weights
            .as_slice()
            .iter()
            .zip(weights.as_slice())
            .map(|(a, b)| (a - b).abs())
            .sum();
        let denom: f64 = weights.as_slice().iter().sum();
        weights = new_weights;
        model = Some(km.model);

        if change / denom < opts.outer_tol {
            converged = true;
            break;
        }
    }

    let model = model.expect("max_outer_iter >= 1");
    // Report centers as cluster means of the adjusted data X - E.
    let adjusted = x.values() - errors.values();
    let members = model.members();
    let mut centers = Array2::zeros((opts.k, p));
    for (c, rows) in members.iter().enumerate() {
        let inv = 1.0 / rows.len() as f64;
        for &i in rows {
            for j in 0..p {
                centers[[c, j]] += adjusted[[i, j]] * inv;
            }
        }
    }
    let model = ClusterModel::new(model.labels().to_vec(), opts.k, centers)?;
    let outlier_indices = errors.active_rows();

    Ok(FitResult {
        model,
        errors,
        weights,
        outlier_indices,
        objective_trace: trace,
        outer_iterations: iterations,
        converged,
    })
}
