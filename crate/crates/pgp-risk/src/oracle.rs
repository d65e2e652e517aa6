//! Independent brute-force reference implementations used for verification.
//!
//! Everything here trades speed for trustworthiness: adaptive quadrature
//! instead of closed forms, bisection instead of inverse functions, explicit
//! Gauss-Jordan inversion instead of Cholesky solves, exhaustive sorted scans
//! instead of the production neighbor search. None of these share numerical
//! kernels with the code they check — no erf, no shared factorization — so
//! agreement between the two routes is meaningful evidence.
//!
//! They are compiled as a normal module (not test-only) so the
//! `pgp-risk verify` command can run the whole suite from the command line.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("quadrature did not reach tolerance {tol} (error estimate {estimate}) within the subdivision limit")]
    ToleranceNotReached { tol: f64, estimate: f64 },
    #[error("invalid quadrature bounds: lower {lower} must be below upper {upper}")]
    InvalidBounds { lower: f64, upper: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}

/// A quadrature value together with its internal error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
}

/// How far (in standard deviations) from the Gaussian center the integrand
/// is treated as identically zero when truncating infinite bounds. At 45
/// sigma the density is below exp(-1012), far under double underflow.
const GAUSSIAN_SUPPORT_SIGMAS: f64 = 45.0;

const MAX_DEPTH: u32 = 48;

/// One adaptive Simpson recursion on [a, b] with precomputed endpoint and
/// midpoint values; accumulates the Richardson error estimate.
fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    err_acc: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let h = b - a;
    let left = h * (fa + 4.0 * flm + fm) / 12.0;
    let right = h * (fm + 4.0 * frm + fb) / 12.0;
    let split = left + right;
    let delta = split - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        *err_acc += delta.abs() / 15.0;
        return split + delta / 15.0;
    }
    adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, err_acc)
        + adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, err_acc)
}

/// Adaptive-Simpson integral of `f` over [a, b] to absolute tolerance `tol`.
///
/// The interval is pre-split into uniform panels before adapting, so narrow
/// features (a Gaussian bump in a long domain) cannot slip between the
/// initial sample points.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<QuadratureResult, OracleError> {
    if !(a < b) {
        return Err(OracleError::InvalidBounds { lower: a, upper: b });
    }
    if !(tol > 0.0) {
        return Err(OracleError::InvalidArgument("tolerance must be > 0"));
    }
    const PANELS: usize = 64;
    let h = (b - a) / PANELS as f64;
    let panel_tol = tol / PANELS as f64;
    let mut total = 0.0;
    let mut err = 0.0;
    for i in 0..PANELS {
        let lo = a + i as f64 * h;
        let hi = if i == PANELS - 1 { b } else { lo + h };
        let mid = 0.5 * (lo + hi);
        let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
        let whole = (hi - lo) * (flo + 4.0 * fmid + fhi) / 6.0;
        total += adaptive_simpson(
            &f, lo, hi, flo, fmid, fhi, whole, panel_tol, MAX_DEPTH, &mut err,
        );
    }
    if err > tol {
        return Err(OracleError::ToleranceNotReached {
            tol,
            estimate: err,
        });
    }
    Ok(QuadratureResult {
        value: total,
        error_estimate: err,
    })
}

/// Integral of `x^moment * exp(-(x - mean)^2 / (2 std^2))` over
/// `[lower, upper]`, where `upper` may be `f64::INFINITY`.
///
/// `moment` must be 0 or 1. The result carries the quadrature error
/// estimate, which is guaranteed at or below `tol` on success.
pub fn quad_truncated_gaussian(
    moment: u8,
    lower: f64,
    upper: f64,
    mean: f64,
    std: f64,
    tol: f64,
) -> Result<QuadratureResult, OracleError> {
    if moment > 1 {
        return Err(OracleError::InvalidArgument("moment must be 0 or 1"));
    }
    if !(std > 0.0 && std.is_finite()) {
        return Err(OracleError::InvalidArgument("std must be finite and > 0"));
    }
    if !(lower < upper) {
        return Err(OracleError::InvalidBounds { lower, upper });
    }
    // Clip to the numerically relevant support.
    let support_lo = mean - GAUSSIAN_SUPPORT_SIGMAS * std;
    let support_hi = mean + GAUSSIAN_SUPPORT_SIGMAS * std;
    let a = lower.max(support_lo);
    let b = upper.min(support_hi);
    if !(a < b) {
        // The requested range lies entirely outside the support.
        return Ok(QuadratureResult {
            value: 0.0,
            error_estimate: 0.0,
        });
    }
    let f = |x: f64| {
        let z = (x - mean) / std;
        let g = (-0.5 * z * z).exp();
        if moment == 0 {
            g
        } else {
            x * g
        }
    };
    integrate(f, a, b, tol)
}

/// Quantile of the positive-price truncated Gaussian by bisection on the
/// quadrature CDF. Independent of every closed-form code path.
///
/// Returns `q` with `P[0 < X <= q] / P[X > 0] = alpha` to within `tol` in
/// the argument.
pub fn bisect_quantile(alpha: f64, mean: f64, std: f64, tol: f64) -> Result<f64, OracleError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(OracleError::InvalidArgument("alpha must be in (0, 1)"));
    }
    if !(tol > 0.0) {
        return Err(OracleError::InvalidArgument("tolerance must be > 0"));
    }
    // Normalization over (0, inf); integrate two digits tighter than the
    // bisection needs so CDF noise cannot steer the bracket.
    let quad_tol = 1e-13;
    let z = quad_truncated_gaussian(0, 0.0, f64::INFINITY, mean, std, quad_tol)?.value;
    let mut lo = 0.0_f64;
    let mut hi = (mean + GAUSSIAN_SUPPORT_SIGMAS * std).max(tol);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let mass = quad_truncated_gaussian(0, 0.0, mid, mean, std, quad_tol * z)
            .map(|r| r.value)
            .unwrap_or(0.0);
        if mass / z < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gaussian_normalization_over_full_line() {
        // integral of exp(-x^2/2) over R is sqrt(2 pi).
        let r = quad_truncated_gaussian(0, f64::NEG_INFINITY, f64::INFINITY, 0.0, 1.0, 1e-11)
            .unwrap();
        assert!((r.value - (2.0 * PI).sqrt()).abs() < 1e-11);
        assert!(r.error_estimate <= 1e-11);
    }

    #[test]
    fn negligible_truncation_recovers_full_mass() {
        // mean far above zero: the positive half-line holds all the mass.
        let std = 2.5;
        let r = quad_truncated_gaussian(0, 0.0, f64::INFINITY, 40.0, std, 1e-10).unwrap();
        assert!((r.value - (2.0 * PI).sqrt() * std).abs() < 1e-9);
    }

    #[test]
    fn first_moment_of_centered_gaussian_vanishes() {
        let r = quad_truncated_gaussian(1, f64::NEG_INFINITY, f64::INFINITY, 0.0, 1.3, 1e-10)
            .unwrap();
        assert!(r.value.abs() < 1e-10);
    }

    #[test]
    fn range_outside_support_is_zero() {
        let r = quad_truncated_gaussian(0, 100.0, 200.0, 0.0, 1.0, 1e-12).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn invalid_bounds_are_rejected() {
        assert!(matches!(
            quad_truncated_gaussian(0, 1.0, 1.0, 0.0, 1.0, 1e-10),
            Err(OracleError::InvalidBounds { .. })
        ));
        assert!(matches!(
            quad_truncated_gaussian(2, 0.0, 1.0, 0.0, 1.0, 1e-10),
            Err(OracleError::InvalidArgument(_))
        ));
    }

    #[test]
    fn bisect_quantile_finds_the_median() {
        // mean/std large: the median of the truncated distribution is the mean.
        let q = bisect_quantile(0.5, 30.0, 1.0, 1e-9).unwrap();
        assert!((q - 30.0).abs() < 1e-8);
    }

    #[test]
    fn bisect_quantile_brackets_monotonically() {
        let q10 = bisect_quantile(0.10, 5.0, 2.0, 1e-9).unwrap();
        let q50 = bisect_quantile(0.50, 5.0, 2.0, 1e-9).unwrap();
        let q90 = bisect_quantile(0.90, 5.0, 2.0, 1e-9).unwrap();
        assert!(q10 < q50 && q50 < q90);
        assert!(q10 > 0.0);
    }
}
