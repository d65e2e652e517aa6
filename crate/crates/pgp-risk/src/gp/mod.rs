//! Gaussian-process regression over a training set of standardized
//! patterns: anisotropic squared-exponential covariance, posterior
//! mean/variance at the query pattern, log marginal likelihood with its
//! analytic gradient, and hyperparameter fitting.
//!
//! Conventions used throughout:
//!
//! - The kernel is `c(a, b) = signal_var * exp(-0.5 * sum_d (a_d - b_d)^2 /
//!   s_d^2)` with one length scale per pattern dimension.
//! - The system matrix is `C = Gram + noise_var * I` plus a small relative
//!   jitter (see [`BASE_JITTER`]); all solves go through a Cholesky
//!   factorization, never an explicit inverse of `C`.
//! - The predictive variance is for the *noisy observable*: the prior
//!   variance at the query is `signal_var + noise_var`. The fitted noise
//!   level therefore flows into every downstream uncertainty.
//! - Log-space parameter vectors are ordered `[ln signal_var, ln noise_var,
//!   ln s_1, ..., ln s_l]`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

use crate::pattern::TrainingSet;

mod optimizer;

pub use optimizer::{
    fit_hyperparams, fit_hyperparams_multistart, initializations, OptimizerConfig,
};

/// Relative jitter always added to the diagonal before factorizing, as a
/// fraction of the mean diagonal. Nearest-neighbor training sets routinely
/// contain near-duplicate patterns, which make the Gram matrix singular to
/// working precision even though the model is fine.
pub const BASE_JITTER: f64 = 1e-10;

/// Jitter escalation stops here; a matrix that is not positive definite
/// with `1e-4` of its mean diagonal added is treated as genuinely bad.
pub const MAX_JITTER: f64 = 1e-4;

#[derive(Debug, Error, PartialEq)]
pub enum GpError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("covariance matrix is not positive definite, even after jitter escalation")]
    NonPositiveDefinite,
    #[error("optimizer diverged: non-finite objective after exhausting backtracking")]
    OptimizerDiverged,
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(&'static str),
}

/// Kernel and noise parameters. All strictly positive and finite.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GpHyperparams {
    /// Signal variance (kernel value at zero distance).
    pub signal_var: f64,
    /// Observation noise variance, added to the Gram diagonal.
    pub noise_var: f64,
    /// Per-dimension length scales, one per pattern entry.
    pub length_scales: Vec<f64>,
}

impl GpHyperparams {
    pub fn new(
        signal_var: f64,
        noise_var: f64,
        length_scales: Vec<f64>,
    ) -> Result<Self, GpError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(signal_var) {
            return Err(GpError::InvalidHyperparams("signal_var must be > 0"));
        }
        if !ok(noise_var) {
            return Err(GpError::InvalidHyperparams("noise_var must be > 0"));
        }
        if length_scales.is_empty() || !length_scales.iter().all(|&s| ok(s)) {
            return Err(GpError::InvalidHyperparams(
                "length_scales must be non-empty and > 0",
            ));
        }
        Ok(Self {
            signal_var,
            noise_var,
            length_scales,
        })
    }

    /// Isotropic parameters: every length scale set to `scale`.
    pub fn isotropic(signal_var: f64, noise_var: f64, scale: f64, dim: usize) -> Result<Self, GpError> {
        Self::new(signal_var, noise_var, vec![scale; dim])
    }

    /// Pattern dimension this parameter set applies to.
    pub fn dim(&self) -> usize {
        self.length_scales.len()
    }

    /// `[ln signal_var, ln noise_var, ln s_1, ..., ln s_l]`.
    pub fn to_log(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(2 + self.length_scales.len());
        w.push(self.signal_var.ln());
        w.push(self.noise_var.ln());
        w.extend(self.length_scales.iter().map(|s| s.ln()));
        w
    }

    /// Inverse of [`Self::to_log`]. Errors if any component exponentiates to
    /// zero or infinity.
    pub fn from_log(w: &[f64]) -> Result<Self, GpError> {
        if w.len() < 3 {
            return Err(GpError::InvalidHyperparams(
                "log vector needs at least 3 entries",
            ));
        }
        Self::new(
            w[0].exp(),
            w[1].exp(),
            w[2..].iter().map(|v| v.exp()).collect(),
        )
    }
}

/// Posterior at the query pattern, plus the model evidence at the same
/// hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpPosterior {
    /// Posterior mean of the next standardized value.
    pub mean: f64,
    /// Posterior variance of the noisy observable, clamped at zero.
    pub variance: f64,
    /// Log marginal likelihood of the training targets.
    pub log_likelihood: f64,
}

/// The squared-exponential kernel with per-dimension length scales.
pub fn covariance(a: &[f64], b: &[f64], hp: &GpHyperparams) -> Result<f64, GpError> {
    if a.len() != b.len() {
        return Err(GpError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() != hp.dim() {
        return Err(GpError::DimensionMismatch {
            expected: hp.dim(),
            got: a.len(),
        });
    }
    let mut quad = 0.0;
    for d in 0..a.len() {
        let diff = a[d] - b[d];
        let s = hp.length_scales[d];
        quad += diff * diff / (s * s);
    }
    Ok(hp.signal_var * (-0.5 * quad).exp())
}

/// Squared coordinate differences cached once per training set, so repeated
/// likelihood evaluations during fitting only pay for exponentials.
pub(crate) struct PreparedInputs {
    /// Per dimension `d`: the k x k matrix of `(x_i[d] - x_j[d])^2`.
    sqdiff: Vec<DMatrix<f64>>,
    /// Per dimension `d`: the k-vector of `(x*[d] - x_i[d])^2`.
    query_sqdiff: Vec<DVector<f64>>,
    targets: DVector<f64>,
    k: usize,
    dim: usize,
}

impl PreparedInputs {
    pub(crate) fn new(ts: &TrainingSet) -> Self {
        let k = ts.len();
        let dim = ts.dim();
        let inputs = ts.inputs();
        let query = ts.query().values();
        let mut sqdiff = Vec::with_capacity(dim);
        let mut query_sqdiff = Vec::with_capacity(dim);
        for d in 0..dim {
            let mut m = DMatrix::zeros(k, k);
            for i in 0..k {
                let xi = inputs[i].values()[d];
                for j in 0..k {
                    let diff = xi - inputs[j].values()[d];
                    m[(i, j)] = diff * diff;
                }
            }
            sqdiff.push(m);
            let mut v = DVector::zeros(k);
            for i in 0..k {
                let diff = query[d] - inputs[i].values()[d];
                v[i] = diff * diff;
            }
            query_sqdiff.push(v);
        }
        Self {
            sqdiff,
            query_sqdiff,
            targets: DVector::from_column_slice(ts.targets()),
            k,
            dim,
        }
    }

    pub(crate) fn dim(&self) -> usize {
        self.dim
    }

    /// Correlation part of the Gram matrix (kernel without signal variance).
    fn correlation(&self, hp: &GpHyperparams) -> DMatrix<f64> {
        let mut quad = DMatrix::zeros(self.k, self.k);
        for d in 0..self.dim {
            let inv2 = 1.0 / (hp.length_scales[d] * hp.length_scales[d]);
            quad += &self.sqdiff[d] * inv2;
        }
        quad.map(|q| (-0.5 * q).exp())
    }

    /// Kernel vector between the query and every input.
    fn query_cov(&self, hp: &GpHyperparams) -> DVector<f64> {
        let mut quad = DVector::zeros(self.k);
        for d in 0..self.dim {
            let inv2 = 1.0 / (hp.length_scales[d] * hp.length_scales[d]);
            quad += &self.query_sqdiff[d] * inv2;
        }
        quad.map(|q| hp.signal_var * (-0.5 * q).exp())
    }
}

/// Factorization of the system matrix; records the jitter that was needed.
struct FactorizedSystem {
    chol: Cholesky<f64, Dyn>,
    correlation: DMatrix<f64>,
    /// Relative jitter actually applied (fraction of mean diagonal).
    jitter_frac: f64,
}

fn check_dims(ts: &TrainingSet, hp: &GpHyperparams) -> Result<(), GpError> {
    if ts.dim() != hp.dim() {
        return Err(GpError::DimensionMismatch {
            expected: ts.dim(),
            got: hp.dim(),
        });
    }
    Ok(())
}

/// Builds `C = signal_var * E + noise_var * I + jitter` and factorizes it,
/// escalating the jitter by decades until the Cholesky succeeds.
fn factorize(prep: &PreparedInputs, hp: &GpHyperparams) -> Result<FactorizedSystem, GpError> {
    let correlation = prep.correlation(hp);
    let mean_diag = hp.signal_var + hp.noise_var;
    let mut jitter_frac = BASE_JITTER;
    loop {
        let mut c = &correlation * hp.signal_var;
        let bump = hp.noise_var + jitter_frac * mean_diag;
        for i in 0..prep.k {
            c[(i, i)] += bump;
        }
        if let Some(chol) = Cholesky::new(c) {
            return Ok(FactorizedSystem {
                chol,
                correlation,
                jitter_frac,
            });
        }
        jitter_frac *= 10.0;
        if jitter_frac > MAX_JITTER {
            return Err(GpError::NonPositiveDefinite);
        }
    }
}

fn log_likelihood_from(
    chol: &Cholesky<f64, Dyn>,
    targets: &DVector<f64>,
    alpha: &DVector<f64>,
) -> f64 {
    let k = targets.len() as f64;
    let logdet = 2.0 * chol.l_dirty().diagonal().map(|v| v.ln()).sum();
    -0.5 * logdet - 0.5 * targets.dot(alpha) - 0.5 * k * (2.0 * std::f64::consts::PI).ln()
}

/// Posterior mean and variance at the query pattern, with the evidence.
///
/// `mean = c C^-1 y`, `variance = gamma - c C^-1 c^T` where `gamma` is the
/// prior variance of the noisy observable, `signal_var + noise_var`.
pub fn posterior(ts: &TrainingSet, hp: &GpHyperparams) -> Result<GpPosterior, GpError> {
    check_dims(ts, hp)?;
    let prep = PreparedInputs::new(ts);
    posterior_prepared(&prep, hp)
}

pub(crate) fn posterior_prepared(
    prep: &PreparedInputs,
    hp: &GpHyperparams,
) -> Result<GpPosterior, GpError> {
    let sys = factorize(prep, hp)?;
    let alpha = sys.chol.solve(&prep.targets);
    let c = prep.query_cov(hp);
    let mean = c.dot(&alpha);
    let v = sys.chol.solve(&c);
    let gamma = hp.signal_var + hp.noise_var;
    let variance = (gamma - c.dot(&v)).max(0.0);
    let log_likelihood = log_likelihood_from(&sys.chol, &prep.targets, &alpha);
    Ok(GpPosterior {
        mean,
        variance,
        log_likelihood,
    })
}

/// Log marginal likelihood and its gradient with respect to the
/// log-hyperparameters `[ln signal_var, ln noise_var, ln s_1, ..., ln s_l]`.
///
/// The gradient uses the standard trace identity
/// `dL/dw = 0.5 tr((alpha alpha^T - C^-1) dC/dw)` with `alpha = C^-1 y`.
pub fn log_marginal_likelihood(
    ts: &TrainingSet,
    hp: &GpHyperparams,
) -> Result<(f64, Vec<f64>), GpError> {
    check_dims(ts, hp)?;
    let prep = PreparedInputs::new(ts);
    log_marginal_likelihood_prepared(&prep, hp)
}

pub(crate) fn log_marginal_likelihood_prepared(
    prep: &PreparedInputs,
    hp: &GpHyperparams,
) -> Result<(f64, Vec<f64>), GpError> {
    let sys = factorize(prep, hp)?;
    let alpha = sys.chol.solve(&prep.targets);
    let value = log_likelihood_from(&sys.chol, &prep.targets, &alpha);

    // M = alpha alpha^T - C^-1; the C^-1 comes out of the factorization.
    let mut m = sys.chol.inverse();
    m.neg_mut();
    m.ger(1.0, &alpha, &alpha, 1.0);

    let mut grad = Vec::with_capacity(2 + prep.dim);
    let trace_m: f64 = m.diagonal().sum();
    // dC/d ln signal_var = signal_var * E + jitter_frac * signal_var * I
    let me = m.component_mul(&sys.correlation);
    let me_sum: f64 = me.sum();
    grad.push(0.5 * hp.signal_var * (me_sum + sys.jitter_frac * trace_m));
    // dC/d ln noise_var = noise_var * I + jitter_frac * noise_var * I
    grad.push(0.5 * hp.noise_var * (1.0 + sys.jitter_frac) * trace_m);
    // dC/d ln s_d = signal_var * E .* sqdiff_d / s_d^2
    for d in 0..prep.dim {
        let inv2 = 1.0 / (hp.length_scales[d] * hp.length_scales[d]);
        let dot: f64 = me.component_mul(&prep.sqdiff[d]).sum();
        grad.push(0.5 * hp.signal_var * inv2 * dot);
    }
    Ok((value, grad))
}
