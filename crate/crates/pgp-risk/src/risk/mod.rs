//! Value at Risk and Expected Shortfall for a Gaussian predictive price
//! distribution truncated to positive prices.
//!
//! Prices are nonnegative, so the Gaussian forecast `N(price_mean,
//! price_std^2)` is renormalized on `(0, inf)`. The alpha-quantile of that
//! truncated distribution has a closed form in the inverse error function,
//! and the conditional mean below the quantile (the ES numerator) reduces to
//! a ratio of Gaussian exponentials over an erf difference. Both are
//! implemented here, in return units relative to the last observed price.

use std::f64::consts::{PI, SQRT_2};

use thiserror::Error;

pub mod erf;

pub use erf::{erf_inv, erfc};

/// Where the exp/erfc ratio in the ES bracket switches to the asymptotic
/// Mills-ratio expansion; beyond this the direct terms approach underflow.
const MILLS_SWITCH: f64 = 25.0;

/// Below this erf-difference mass in the ES denominator the ratio is
/// numerically meaningless.
const TAIL_MASS_FLOOR: f64 = 1e-300;

#[derive(Debug, Error, PartialEq)]
pub enum RiskError {
    #[error("alpha must lie strictly between 0 and 1, got {0}")]
    InvalidAlpha(f64),
    #[error("invalid predictive distribution: {0}")]
    InvalidDistribution(&'static str),
    #[error("quantile argument lambda = {0} left the open interval (-1, 1)")]
    LambdaOutOfRange(f64),
    #[error("tail mass below the quantile underflowed; ES is not computable here")]
    TailMassUnderflow,
}

/// Gaussian forecast of the next price, interpreted as truncated to
/// positive prices for all risk computations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictiveDistribution {
    /// Forecast price level (price units).
    pub price_mean: f64,
    /// Forecast price standard deviation (price units), strictly positive.
    pub price_std: f64,
    /// Last observed price (price units), strictly positive.
    pub last_price: f64,
}

impl PredictiveDistribution {
    pub fn new(price_mean: f64, price_std: f64, last_price: f64) -> Result<Self, RiskError> {
        if !price_mean.is_finite() {
            return Err(RiskError::InvalidDistribution("price_mean must be finite"));
        }
        if !(price_std > 0.0 && price_std.is_finite()) {
            return Err(RiskError::InvalidDistribution(
                "price_std must be finite and > 0",
            ));
        }
        if !(last_price > 0.0 && last_price.is_finite()) {
            return Err(RiskError::InvalidDistribution(
                "last_price must be finite and > 0",
            ));
        }
        Ok(Self {
            price_mean,
            price_std,
            last_price,
        })
    }

    /// Expected one-step return implied by the forecast mean.
    pub fn expected_return(&self) -> f64 {
        self.price_mean / self.last_price - 1.0
    }

    /// Forecast volatility in return units.
    pub fn return_vol(&self) -> f64 {
        self.price_std / self.last_price
    }
}

/// One-step risk summary at a fixed tail level.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RiskForecast {
    pub expected_return: f64,
    pub return_vol: f64,
    pub var_alpha: f64,
    pub es_alpha: f64,
    pub alpha: f64,
}

fn check_alpha(alpha: f64) -> Result<(), RiskError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(RiskError::InvalidAlpha(alpha))
    }
}

/// The argument of the inverse error function in the quantile closed form:
/// `lambda = (1 - alpha) * erf(mean / (sqrt(2) std)) - alpha`.
fn lambda(pd: &PredictiveDistribution, alpha: f64) -> f64 {
    let b = pd.price_mean / (SQRT_2 * pd.price_std);
    (1.0 - alpha) * erf::erf(b) - alpha
}

/// Alpha-quantile of the price forecast truncated to positive prices.
///
/// Solves `alpha = P[0 < X <= q] / P[X > 0]` for `X ~ N(price_mean,
/// price_std^2)` in closed form.
pub fn truncated_quantile(pd: &PredictiveDistribution, alpha: f64) -> Result<f64, RiskError> {
    check_alpha(alpha)?;
    let lam = lambda(pd, alpha);
    let inv = erf_inv(lam).ok_or(RiskError::LambdaOutOfRange(lam))?;
    Ok(pd.price_mean - SQRT_2 * pd.price_std * inv)
}

/// Value at Risk at level `alpha`, in return units: the return threshold
/// that the realized return falls below with probability `alpha`.
pub fn var_estimate(pd: &PredictiveDistribution, alpha: f64) -> Result<f64, RiskError> {
    check_alpha(alpha)?;
    let lam = lambda(pd, alpha);
    let inv = erf_inv(lam).ok_or(RiskError::LambdaOutOfRange(lam))?;
    Ok(pd.expected_return() - SQRT_2 * pd.price_std / pd.last_price * inv)
}

/// Truncated series for the scaled complementary error function,
/// `erfc(x) ~ exp(-x^2) / (x sqrt(pi)) * mills_series(x)` for large `x`.
fn mills_series(x: f64) -> f64 {
    let u = 1.0 / (2.0 * x * x);
    1.0 - u * (1.0 - 3.0 * u * (1.0 - 5.0 * u * (1.0 - 7.0 * u * (1.0 - 9.0 * u))))
}

/// The bracketed ratio in the ES closed form,
/// `(exp(-a^2) - exp(-b^2)) / (erf(b) - erf(a))`, evaluated stably.
///
/// Here `b = mean / (sqrt(2) std)` and `a = (mean - quantile) / (sqrt(2)
/// std)`, so `a <= b`. The denominator is formed from erfc values, which
/// keeps full relative precision when both arguments sit in the right tail;
/// once `exp(-a^2)` itself approaches the underflow threshold the whole
/// ratio switches to the Mills-ratio expansion.
fn es_bracket(a: f64, b: f64) -> Result<f64, RiskError> {
    if a > MILLS_SWITCH {
        // Both exponentials are at or below ~1e-272; expand
        // erfc(x) = exp(-x^2) mills_series(x) / (x sqrt(pi)) and cancel
        // the common exp(-a^2) factor analytically.
        if b - a < 1.0 {
            return Err(RiskError::TailMassUnderflow);
        }
        let cross = (a * a - b * b).exp(); // exp(a^2 - b^2), <= e^-50 here
        let num = 1.0 - cross;
        let den = mills_series(a) - (a / b) * cross * mills_series(b);
        return Ok(a * PI.sqrt() * num / den);
    }
    let den = erfc(a) - erfc(b);
    if !(den > TAIL_MASS_FLOOR) {
        return Err(RiskError::TailMassUnderflow);
    }
    let num = (-a * a).exp() - (-b * b).exp();
    Ok(num / den)
}

/// Expected Shortfall at level `alpha`, in return units: the expected
/// return conditional on the price ending below its alpha-quantile.
pub fn es_estimate(pd: &PredictiveDistribution, alpha: f64) -> Result<f64, RiskError> {
    check_alpha(alpha)?;
    let lam = lambda(pd, alpha);
    // a = (mean - quantile) / (sqrt(2) std) is exactly erf_inv(lambda).
    let a = erf_inv(lam).ok_or(RiskError::LambdaOutOfRange(lam))?;
    let b = pd.price_mean / (SQRT_2 * pd.price_std);
    let bracket = es_bracket(a, b)?;
    let esv = pd.price_mean - (2.0 / PI).sqrt() * pd.price_std * bracket;
    Ok(esv / pd.last_price - 1.0)
}

/// Computes the full risk summary for one predictive distribution.
pub fn risk_forecast(pd: &PredictiveDistribution, alpha: f64) -> Result<RiskForecast, RiskError> {
    Ok(RiskForecast {
        expected_return: pd.expected_return(),
        return_vol: pd.return_vol(),
        var_alpha: var_estimate(pd, alpha)?,
        es_alpha: es_estimate(pd, alpha)?,
        alpha,
    })
}
