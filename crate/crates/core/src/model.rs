//! Core domain types shared by all modules.
//!
//! Construction validates every structural invariant at the boundary;
//! algorithm internals may violate invariants only transiently inside a
//! single operation. All types are immutable value objects once built and
//! are safe to share between concurrent workers.
//!
//! Cluster labels are 1-based in every external interface. Row and column
//! indices (outliers, informative variables) are 0-based.

use std::collections::BTreeSet;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{ArskError, Result};

/// Tolerance for the unit-norm invariant of [`WeightVector`].
pub const WEIGHT_NORM_TOL: f64 = 1e-10;

fn rows_to_array(rows: Vec<Vec<f64>>) -> std::result::Result<Array2<f64>, String> {
    let n = rows.len();
    let p = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != p) {
        return Err("ragged rows".to_string());
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((n, p), flat).map_err(|e| e.to_string())
}

fn array_to_rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

// ---------------------------------------------------------------------------
// DataMatrix
// ---------------------------------------------------------------------------

/// The n x p observation matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct DataMatrix {
    values: Array2<f64>,
}

impl DataMatrix {
    /// Build from an owned matrix, validating n >= 2, p >= 1 and finiteness.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (n, p) = values.dim();
        if n < 2 {
            return Err(ArskError::InvalidParameter(format!(
                "data matrix needs at least 2 rows, got {n}"
            )));
        }
        if p < 1 {
            return Err(ArskError::InvalidParameter(
                "data matrix needs at least 1 column".to_string(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ArskError::InvalidParameter(
                "data matrix contains a non-finite entry".to_string(),
            ));
        }
        Ok(Self { values })
    }

    /// Build from row vectors (all the same length).
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let a = rows_to_array(rows).map_err(ArskError::InvalidParameter)?;
        Self::new(a)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.values.column(j)
    }

    /// Column means of the matrix (the grand center).
    pub fn column_means(&self) -> Vec<f64> {
        let n = self.n() as f64;
        (0..self.p()).map(|j| self.values.column(j).sum() / n).collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for DataMatrix {
    type Error = ArskError;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(rows)
    }
}

impl From<DataMatrix> for Vec<Vec<f64>> {
    fn from(m: DataMatrix) -> Self {
        array_to_rows(&m.values)
    }
}

// ---------------------------------------------------------------------------
// ClusterModel
// ---------------------------------------------------------------------------

/// A hard partition into K clusters plus the K x p cluster centers.
///
/// Labels are 1-based cluster ids; every id in `1..=k` appears at least once.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ClusterModelJson", into = "ClusterModelJson")]
pub struct ClusterModel {
    labels: Vec<usize>,
    k: usize,
    centers: Array2<f64>,
}

#[derive(Serialize, Deserialize)]
struct ClusterModelJson {
    labels: Vec<usize>,
    k: usize,
    centers: Vec<Vec<f64>>,
}

impl ClusterModel {
    pub fn new(labels: Vec<usize>, k: usize, centers: Array2<f64>) -> Result<Self> {
        if k == 0 {
            return Err(ArskError::InvalidParameter("k must be >= 1".to_string()));
        }
        if centers.nrows() != k {
            return Err(ArskError::DimensionMismatch(format!(
                "centers has {} rows, expected k = {k}",
                centers.nrows()
            )));
        }
        if centers.iter().any(|v| !v.is_finite()) {
            return Err(ArskError::InvalidParameter(
                "cluster centers contain a non-finite entry".to_string(),
            ));
        }
        let mut seen = vec![false; k];
        for &l in &labels {
            if l < 1 || l > k {
                return Err(ArskError::InvalidParameter(format!(
                    "label {l} outside 1..={k}"
                )));
            }
            seen[l - 1] = true;
        }
        if let Some(empty) = seen.iter().position(|s| !s) {
            return Err(ArskError::InvalidParameter(format!(
                "cluster {} is empty",
                empty + 1
            )));
        }
        Ok(Self { labels, k, centers })
    }

    #[cfg(test)]
    pub(crate) fn new_unchecked(labels: Vec<usize>, k: usize, centers: Array2<f64>) -> Self {
        Self { labels, k, centers }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// 1-based cluster id per observation.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn centers(&self) -> &Array2<f64> {
        &self.centers
    }

    /// Observation counts per cluster, indexed by cluster id - 1.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &l in &self.labels {
            sizes[l - 1] += 1;
        }
        sizes
    }

    /// Member row indices (0-based) per cluster, indexed by cluster id - 1.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            m[l - 1].push(i);
        }
        m
    }
}

impl TryFrom<ClusterModelJson> for ClusterModel {
    type Error = ArskError;
    fn try_from(j: ClusterModelJson) -> Result<Self> {
        let centers = rows_to_array(j.centers).map_err(ArskError::InvalidParameter)?;
        Self::new(j.labels, j.k, centers)
    }
}

impl From<ClusterModel> for ClusterModelJson {
    fn from(m: ClusterModel) -> Self {
        ClusterModelJson {
            labels: m.labels,
            k: m.k,
            centers: array_to_rows(&m.centers),
        }
    }
}

// ---------------------------------------------------------------------------
// ErrorMatrix
// ---------------------------------------------------------------------------

/// The n x p matrix of per-observation error parameters.
///
/// A row is "active" (its observation is an outlier) iff its L2 norm is
/// strictly positive; inactive rows are exactly zero in every coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct ErrorMatrix {
    values: Array2<f64>,
}

impl ErrorMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ArskError::InvalidParameter(
                "error matrix contains a non-finite entry".to_string(),
            ));
        }
        Ok(Self { values })
    }

    pub fn zeros(n: usize, p: usize) -> Self {
        Self {
            values: Array2::zeros((n, p)),
        }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.values.column(j)
    }

    /// L2 norm of each row.
    pub fn row_norms(&self) -> Vec<f64> {
        self.values
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }

    /// 0-based indices of rows with strictly positive L2 norm.
    pub fn active_rows(&self) -> BTreeSet<usize> {
        self.values
            .rows()
            .into_iter()
            .enumerate()
            .filter(|(_, r)| r.iter().any(|&v| v != 0.0))
            .map(|(i, _)| i)
            .collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for ErrorMatrix {
    type Error = ArskError;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let a = rows_to_array(rows).map_err(ArskError::InvalidParameter)?;
        Self::new(a)
    }
}

impl From<ErrorMatrix> for Vec<Vec<f64>> {
    fn from(m: ErrorMatrix) -> Self {
        array_to_rows(&m.values)
    }
}

// ---------------------------------------------------------------------------
// WeightVector
// ---------------------------------------------------------------------------

/// Nonnegative variable weights on the unit L2 sphere.
///
/// The degenerate all-zero state is not representable here; fits signal it
/// with [`ArskError::DegenerateWeights`] instead of returning a vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector {
    weights: Vec<f64>,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(ArskError::InvalidParameter(
                "weight vector must not be empty".to_string(),
            ));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ArskError::InvalidParameter(
                "weights must be finite and nonnegative".to_string(),
            ));
        }
        let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > WEIGHT_NORM_TOL {
            return Err(ArskError::InvalidParameter(format!(
                "weight vector must have unit L2 norm, got {norm}"
            )));
        }
        Ok(Self { weights })
    }

    /// The uniform weight vector `w_j = 1/sqrt(p)`.
    pub fn uniform(p: usize) -> Self {
        let w = 1.0 / (p as f64).sqrt();
        Self {
            weights: vec![w; p],
        }
    }

    #[cfg(test)]
    pub(crate) fn new_unchecked(weights: Vec<f64>) -> Self {
        Self { weights }
    }

    pub fn p(&self) -> usize {
        self.weights.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    /// 0-based indices of variables with strictly positive weight.
    pub fn support(&self) -> BTreeSet<usize> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(j, _)| j)
            .collect()
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = ArskError;
    fn try_from(w: Vec<f64>) -> Result<Self> {
        Self::new(w)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.weights
    }
}

// ---------------------------------------------------------------------------
// PenaltySpec
// ---------------------------------------------------------------------------

/// Penalty family for error rows (group form) and weights (scalar form).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    Lasso,
    Scad,
}

/// A penalty kind with its tuning parameter.
///
/// `a` is the SCAD shape parameter; it must exceed 2 so the middle-branch
/// denominator `a - 2` stays positive. Default 3.7.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PenaltySpecJson", into = "PenaltySpecJson")]
pub struct PenaltySpec {
    kind: PenaltyKind,
    lambda: f64,
    a: f64,
}

#[derive(Serialize, Deserialize)]
struct PenaltySpecJson {
    kind: PenaltyKind,
    lambda: f64,
    #[serde(default = "default_scad_a")]
    a: f64,
}

pub const DEFAULT_SCAD_A: f64 = 3.7;

fn default_scad_a() -> f64 {
    DEFAULT_SCAD_A
}

impl PenaltySpec {
    pub fn lasso(lambda: f64) -> Result<Self> {
        Self::new(PenaltyKind::Lasso, lambda, DEFAULT_SCAD_A)
    }

    pub fn scad(lambda: f64) -> Result<Self> {
        Self::new(PenaltyKind::Scad, lambda, DEFAULT_SCAD_A)
    }

    pub fn new(kind: PenaltyKind, lambda: f64, a: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(ArskError::InvalidParameter(format!(
                "penalty lambda must be nonnegative, got {lambda}"
            )));
        }
        if kind == PenaltyKind::Scad && a <= 2.0 {
            return Err(ArskError::InvalidParameter(format!(
                "SCAD shape parameter a must exceed 2, got {a}"
            )));
        }
        Ok(Self { kind, lambda, a })
    }

    pub fn kind(&self) -> PenaltyKind {
        self.kind
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// Same kind and shape, different lambda.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.kind, lambda, self.a)
    }
}

impl TryFrom<PenaltySpecJson> for PenaltySpec {
    type Error = ArskError;
    fn try_from(j: PenaltySpecJson) -> Result<Self> {
        Self::new(j.kind, j.lambda, j.a)
    }
}

impl From<PenaltySpec> for PenaltySpecJson {
    fn from(s: PenaltySpec) -> Self {
        PenaltySpecJson {
            kind: s.kind,
            lambda: s.lambda,
            a: s.a,
        }
    }
}

// ---------------------------------------------------------------------------
// FitResult
// ---------------------------------------------------------------------------

/// Everything a fit produces: the partition, the error matrix, the variable
/// weights, the outlier set implied by active error rows, and convergence
/// diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FitResultJson", into = "FitResultJson")]
pub struct FitResult {
    pub model: ClusterModel,
    pub errors: ErrorMatrix,
    pub weights: WeightVector,
    /// 0-based row indices with strictly positive error-row norm.
    pub outlier_indices: BTreeSet<usize>,
    /// Full objective value recorded once per outer iteration.
    pub objective_trace: Vec<f64>,
    pub outer_iterations: usize,
    pub converged: bool,
}

/// External JSON schema of [`FitResult`]; matrices are row-major nested arrays.
#[derive(Serialize, Deserialize)]
struct FitResultJson {
    labels: Vec<usize>,
    centers: Vec<Vec<f64>>,
    errors: Vec<Vec<f64>>,
    weights: Vec<f64>,
    outliers: Vec<usize>,
    objective_trace: Vec<f64>,
    iterations: usize,
    converged: bool,
}

impl TryFrom<FitResultJson> for FitResult {
    type Error = ArskError;
    fn try_from(j: FitResultJson) -> Result<Self> {
        let centers = rows_to_array(j.centers).map_err(ArskError::InvalidParameter)?;
        let k = centers.nrows();
        let model = ClusterModel::new(j.labels, k, centers)?;
        let errors = ErrorMatrix::try_from(j.errors)?;
        let weights = WeightVector::new(j.weights)?;
        Ok(FitResult {
            model,
            errors,
            weights,
            outlier_indices: j.outliers.into_iter().collect(),
            objective_trace: j.objective_trace,
            outer_iterations: j.iterations,
            converged: j.converged,
        })
    }
}

impl From<FitResult> for FitResultJson {
    fn from(f: FitResult) -> Self {
        FitResultJson {
            labels: f.model.labels.clone(),
            centers: array_to_rows(&f.model.centers),
            errors: array_to_rows(&f.errors.values),
            weights: f.weights.weights,
            outliers: f.outlier_indices.into_iter().collect(),
            objective_trace: f.objective_trace,
            iterations: f.outer_iterations,
            converged: f.converged,
        }
    }
}

/// Check every structural invariant of a [`FitResult`] and report violations.
///
/// Violations are data, not failures: the empty list means the result is
/// well-formed.
pub fn validate(fit: &FitResult) -> Vec<String> {
    let mut violations = Vec::new();
    let n = fit.errors.n();
    let p = fit.errors.p();
    let k = fit.model.k();

    if fit.model.n() != n {
        violations.push(format!(
            "labels: length {} does not match error matrix rows {n}",
            fit.model.n()
        ));
    }
    if fit.model.centers().ncols() != p {
        violations.push(format!(
            "centers: {} columns do not match error matrix columns {p}",
            fit.model.centers().ncols()
        ));
    }
    let mut seen = vec![false; k];
    for (i, &l) in fit.model.labels().iter().enumerate() {
        if l < 1 || l > k {
            violations.push(format!("labels: row {i} has label {l} outside 1..={k}"));
        } else {
            seen[l - 1] = true;
        }
    }
    for (c, s) in seen.iter().enumerate() {
        if !s {
            violations.push(format!("labels: cluster {} is empty", c + 1));
        }
    }

    if fit.weights.p() != p {
        violations.push(format!(
            "weights: length {} does not match {p} variables",
            fit.weights.p()
        ));
    }
    if fit.weights.as_slice().iter().any(|w| *w < 0.0) {
        violations.push("weights: negative entry".to_string());
    }
    let norm = fit
        .weights
        .as_slice()
        .iter()
        .map(|w| w * w)
        .sum::<f64>()
        .sqrt();
    if (norm - 1.0).abs() > WEIGHT_NORM_TOL {
        violations.push(format!("weights: unit-norm violated, norm = {norm}"));
    }

    if fit.errors.values().iter().any(|v| !v.is_finite()) {
        violations.push("errors: non-finite entry".to_string());
    }

    let active = fit.errors.active_rows();
    if active != fit.outlier_indices {
        violations.push(format!(
            "outliers: recorded set ({:?}) differs from active error rows ({:?})",
            fit.outlier_indices, active
        ));
    }

    violations
}
