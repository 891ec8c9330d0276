//! Evaluation metrics: clustering error rate (CER), variable-selection
//! TPR/TNR, and outlier-detection confusion counts.

use std::collections::{BTreeSet, HashMap};

use crate::error::{ArskError, Result};

/// Clustering error rate: the fraction of observation pairs whose
/// co-membership disagrees between the two partitions.
///
/// Computed by co-membership counting over the contingency table, which is
/// exactly equal to O(n^2) pair enumeration: the disagreement count is
/// `same(truth) + same(predicted) - 2 * same(both)`.
pub fn cer(truth: &[usize], predicted: &[usize]) -> Result<f64> {
    if truth.len() != predicted.len() {
        return Err(ArskError::DimensionMismatch(format!(
            "label vectors differ in length: {} vs {}",
            truth.len(),
            predicted.len()
        )));
    }
    let n = truth.len();
    if n < 2 {
        return Err(ArskError::InvalidParameter(
            "CER needs at least 2 observations".to_string(),
        ));
    }

    let mut truth_counts: HashMap<usize, u64> = HashMap::new();
    let mut pred_counts: HashMap<usize, u64> = HashMap::new();
    let mut joint_counts: HashMap<(usize, usize), u64> = HashMap::new();
    for (&t, &p) in truth.iter().zip(predicted) {
        *truth_counts.entry(t).or_insert(0) += 1;
        *pred_counts.entry(p).or_insert(0) += 1;
        *joint_counts.entry((t, p)).or_insert(0) += 1;
    }

    let comb2 = |m: u64| m * (m - 1) / 2;
    let same_truth: u64 = truth_counts.values().map(|&m| comb2(m)).sum();
    let same_pred: u64 = pred_counts.values().map(|&m| comb2(m)).sum();
    let same_both: u64 = joint_counts.values().map(|&m| comb2(m)).sum();
    let disagreements = same_truth + same_pred - 2 * same_both;
    let total = comb2(n as u64);
    Ok(disagreements as f64 / total as f64)
}

/// CER with detected outliers treated as a (K+1)-th cluster on both sides:
/// flagged truth rows and detected rows are relabeled to `k + 1` before the
/// comparison.
pub fn cer_with_outliers(
    truth_labels: &[usize],
    truth_flags: &[bool],
    predicted_labels: &[usize],
    predicted_outliers: &BTreeSet<usize>,
    k: usize,
) -> Result<f64> {
    if truth_labels.len() != truth_flags.len() {
        return Err(ArskError::DimensionMismatch(format!(
            "truth labels ({}) and flags ({}) differ in length",
            truth_labels.len(),
            truth_flags.len()
        )));
    }
    let truth: Vec<usize> = truth_labels
        .iter()
        .zip(truth_flags)
        .map(|(&l, &f)| if f { k + 1 } else { l })
        .collect();
    let predicted: Vec<usize> = predicted_labels
        .iter()
        .enumerate()
        .map(|(i, &l)| if predicted_outliers.contains(&i) { k + 1 } else { l })
        .collect();
    cer(&truth, &predicted)
}

/// Variable-selection true positive and true negative rates.
///
/// TPR is the fraction of informative variables with strictly positive
/// weight; TNR is the fraction of non-informative variables with exactly
/// zero weight. Exact zero testing is valid because the thresholding
/// operators produce exact zeros. Degenerate cases: `q = 0` defines TPR as
/// 1, `q = p` defines TNR as 1.
pub fn tpr_tnr(weights: &[f64], informative: &BTreeSet<usize>, p: usize) -> (f64, f64) {
    debug_assert_eq!(weights.len(), p);
    debug_assert!(informative.iter().all(|&j| j < p));
    let q = informative.len();

    let tpr = if q == 0 {
        1.0
    } else {
        let hits = informative.iter().filter(|&&j| weights[j] > 0.0).count();
        hits as f64 / q as f64
    };
    let tnr = if q == p {
        1.0
    } else {
        let hits = (0..p)
            .filter(|j| !informative.contains(j) && weights[*j] == 0.0)
            .count();
        hits as f64 / (p - q) as f64
    };
    (tpr, tnr)
}

/// Outlier-detection confusion counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct OutlierConfusion {
    pub true_pos: usize,
    pub false_pos: usize,
    pub false_neg: usize,
    pub detected: usize,
}

pub fn outlier_confusion(truth_flags: &[bool], detected: &BTreeSet<usize>) -> OutlierConfusion {
    debug_assert!(detected.iter().all(|&i| i < truth_flags.len()));
    let truth: BTreeSet<usize> = truth_flags
        .iter()
        .enumerate()
        .filter(|(_, &f)| f)
        .map(|(i, _)| i)
        .collect();
    let true_pos = truth.intersection(detected).count();
    OutlierConfusion {
        true_pos,
        false_pos: detected.len() - true_pos,
        false_neg: truth.len() - true_pos,
        detected: detected.len(),
    }
}
