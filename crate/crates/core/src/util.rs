//! Small numeric helpers shared across modules.

/// L2 norm of a slice.
pub(crate) fn l2_norm(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Squared Euclidean distance between equal-length slices.
pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// `ceil(frac * n)` guarded against binary-representation drift
/// (`0.8 * 150` must give 120, not 121).
pub(crate) fn ceil_fraction(frac: f64, n: usize) -> usize {
    let raw = frac * n as f64;
    let m = (raw - 1e-9).ceil().max(0.0) as usize;
    m.min(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_fraction_handles_representation_drift() {
        assert_eq!(ceil_fraction(0.8, 150), 120);
        assert_eq!(ceil_fraction(0.1, 22), 3);
        assert_eq!(ceil_fraction(0.5, 10), 5);
        assert_eq!(ceil_fraction(0.0, 10), 0);
        assert_eq!(ceil_fraction(1.0, 10), 10);
        assert_eq!(ceil_fraction(0.3, 10), 3);
    }
}
