//! Column standardization for real-world CSV inputs.

use arsk_core::DataMatrix;

/// Center each column to mean zero and scale it to unit sample standard
/// deviation (n-1 denominator). Constant columns are centered but left
/// unscaled; their 0-based indices are returned so callers can warn.
pub fn standardize(x: &DataMatrix) -> (DataMatrix, Vec<usize>) {
    let n = x.n();
    let p = x.p();
    let mut values = x.values().clone();
    let mut constant = Vec::new();
    for j in 0..p {
        let mean = values.column(j).sum() / n as f64;
        let ss: f64 = values.column(j).iter().map(|v| (v - mean) * (v - mean)).sum();
        let sd = (ss / (n as f64 - 1.0)).sqrt();
        if sd > 0.0 {
            for i in 0..n {
                values[[i, j]] = (values[[i, j]] - mean) / sd;
            }
        } else {
            constant.push(j);
            for i in 0..n {
                values[[i, j]] -= mean;
            }
        }
    }
    let x = DataMatrix::new(values).expect("standardization preserves validity");
    (x, constant)
}
