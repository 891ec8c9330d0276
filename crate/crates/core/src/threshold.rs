//! Scalar and multivariate (group) soft/SCAD thresholding operators and
//! penalty evaluation.
//!
//! The scalar operators are the proximal maps of the lasso and SCAD
//! penalties applied to a quadratic loss; the group operators act on the L2
//! norm of a vector and rescale it, so they never change its direction.
//! Boundary ties resolve to the lower branch; the operators are continuous
//! there, so the choice only fixes determinism.

use crate::error::{ArskError, Result};
use crate::model::{PenaltyKind, PenaltySpec};
use crate::util::l2_norm;

fn check_lambda(lambda: f64) -> Result<()> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(ArskError::InvalidParameter(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    Ok(())
}

fn check_a(a: f64) -> Result<()> {
    if !a.is_finite() || a <= 2.0 {
        return Err(ArskError::InvalidParameter(format!(
            "SCAD shape parameter a must exceed 2, got {a}"
        )));
    }
    Ok(())
}

pub(crate) fn soft_scalar_raw(x: f64, lambda: f64) -> f64 {
    if x > lambda {
        x - lambda
    } else if x < -lambda {
        x + lambda
    } else {
        0.0
    }
}

/// Soft-thresholding operator: `x - lambda` above the dead zone, `x + lambda`
/// below it, zero inside `|x| <= lambda`.
pub fn soft_scalar(x: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(soft_scalar_raw(x, lambda))
}

pub(crate) fn scad_scalar_raw(x: f64, lambda: f64, a: f64) -> f64 {
    let ax = x.abs();
    if ax <= 2.0 * lambda {
        soft_scalar_raw(x, lambda)
    } else if ax < a * lambda {
        ((a - 1.0) * x - a * lambda * x.signum()) / (a - 2.0)
    } else {
        x
    }
}

/// SCAD-thresholding operator: soft thresholding up to `2*lambda`, a linear
/// transition band up to `a*lambda`, identity beyond.
pub fn scad_scalar(x: f64, lambda: f64, a: f64) -> Result<f64> {
    check_lambda(lambda)?;
    check_a(a)?;
    Ok(scad_scalar_raw(x, lambda, a))
}

/// Multiplicative factor applied by the multivariate soft threshold to a
/// vector of L2 norm `norm`. Zero norm maps to factor 0 (the zero vector is
/// the limit from any direction).
fn soft_group_factor(norm: f64, lambda: f64) -> f64 {
    if norm <= lambda {
        0.0
    } else {
        1.0 - lambda / norm
    }
}

fn scad_group_factor(norm: f64, lambda: f64, a: f64) -> f64 {
    if norm <= 2.0 * lambda {
        soft_group_factor(norm, lambda)
    } else if norm <= a * lambda {
        (a - 1.0) / (a - 2.0) * soft_group_factor(norm, a * lambda / (a - 1.0))
    } else {
        1.0
    }
}

pub(crate) fn soft_group_raw(z: &[f64], lambda: f64) -> Vec<f64> {
    let f = soft_group_factor(l2_norm(z), lambda);
    scale(z, f)
}

pub(crate) fn scad_group_raw(z: &[f64], lambda: f64, a: f64) -> Vec<f64> {
    let f = scad_group_factor(l2_norm(z), lambda, a);
    scale(z, f)
}

fn scale(z: &[f64], factor: f64) -> Vec<f64> {
    if factor == 0.0 {
        vec![0.0; z.len()]
    } else {
        z.iter().map(|v| v * factor).collect()
    }
}

/// Multivariate soft-threshold operator: `z * max(0, 1 - lambda/||z||)`,
/// the zero vector when `||z|| <= lambda` or `||z|| = 0`.
pub fn soft_group(z: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    Ok(soft_group_raw(z, lambda))
}

/// Multivariate SCAD-threshold operator: soft thresholding up to
/// `||z|| <= 2*lambda`, a rescaled soft threshold in the transition band,
/// and the identity for `||z|| > a*lambda`.
pub fn scad_group(z: &[f64], lambda: f64, a: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    check_a(a)?;
    Ok(scad_group_raw(z, lambda, a))
}

pub(crate) fn penalty_value_raw(spec: &PenaltySpec, v: f64) -> f64 {
    let lambda = spec.lambda();
    match spec.kind() {
        PenaltyKind::Lasso => lambda * v,
        PenaltyKind::Scad => {
            let a = spec.a();
            if v <= lambda {
                lambda * v
            } else if v <= a * lambda {
                -(v * v - 2.0 * a * lambda * v + lambda * lambda) / (2.0 * (a - 1.0))
            } else {
                (a + 1.0) * lambda * lambda / 2.0
            }
        }
    }
}

/// Penalty evaluated at a nonnegative magnitude `v` (either `|w_j|` or an
/// error-row L2 norm).
pub fn penalty_value(spec: &PenaltySpec, v: f64) -> Result<f64> {
    if !v.is_finite() || v < 0.0 {
        return Err(ArskError::InvalidParameter(format!(
            "penalty argument must be nonnegative, got {v}"
        )));
    }
    Ok(penalty_value_raw(spec, v))
}

/// Scalar threshold dispatched on the penalty kind of `spec`.
pub(crate) fn scalar_threshold(spec: &PenaltySpec, x: f64) -> f64 {
    match spec.kind() {
        PenaltyKind::Lasso => soft_scalar_raw(x, spec.lambda()),
        PenaltyKind::Scad => scad_scalar_raw(x, spec.lambda(), spec.a()),
    }
}

/// Group threshold factor for a vector of norm `norm`, dispatched on `spec`.
pub(crate) fn group_threshold_factor(spec: &PenaltySpec, norm: f64) -> f64 {
    match spec.kind() {
        PenaltyKind::Lasso => soft_group_factor(norm, spec.lambda()),
        PenaltyKind::Scad => scad_group_factor(norm, spec.lambda(), spec.a()),
    }
}
