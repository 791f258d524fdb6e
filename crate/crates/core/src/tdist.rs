//! Generalized Student's t errors: density, MAR log-likelihood, sampling and
//! the information constants.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{MarError, Result};
use crate::lagpoly::{mar_filter_into, LagPolynomial};

/// Degrees of freedom `nu` and scale `eta` of a location-zero t distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TParams {
    pub nu: f64,
    pub eta: f64,
}

impl TParams {
    pub fn new(nu: f64, eta: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(MarError::Domain(format!("degrees of freedom must be positive, got {nu}")));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(MarError::Domain(format!("scale must be positive, got {eta}")));
        }
        Ok(Self { nu, eta })
    }

    /// `ln Gamma((nu+1)/2) - ln(sqrt(nu pi) eta) - ln Gamma(nu/2)`.
    fn log_norm_const(&self) -> f64 {
        let nu = self.nu;
        ln_gamma(0.5 * (nu + 1.0)) - 0.5 * (nu * std::f64::consts::PI).ln() - self.eta.ln() - ln_gamma(0.5 * nu)
    }
}

/// Variance of the error term; infinite for `nu <= 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorVariance {
    Finite(f64),
    Infinite,
}

impl ErrorVariance {
    pub fn finite(self) -> Option<f64> {
        match self {
            ErrorVariance::Finite(v) => Some(v),
            ErrorVariance::Infinite => None,
        }
    }
}

pub fn log_density(eps: f64, p: &TParams) -> f64 {
    let z = eps / p.eta;
    p.log_norm_const() - 0.5 * (p.nu + 1.0) * (z * z / p.nu).ln_1p()
}

/// Approximate log-likelihood of a MAR(r, s) model.
///
/// Residuals are `phi(L) varphi(L^-1) y_t` for `t = r+1 .. T-s`, so the
/// constant term is multiplied by `T - r - s`, which is also the number of
/// terms in the sum.
pub fn loglik(y: &[f64], phi: &LagPolynomial, vphi: &LagPolynomial, p: &TParams) -> Result<f64> {
    let (r, s) = (phi.degree(), vphi.degree());
    if y.len() <= r + s {
        return Err(MarError::InvalidInput(format!(
            "series of length {} is too short for a MAR({r},{s})",
            y.len()
        )));
    }
    let mut eps = Vec::with_capacity(y.len());
    mar_filter_into(y, phi.coeffs(), vphi.coeffs(), &mut eps);
    Ok(loglik_residuals(&eps, p))
}

/// Log-likelihood of an already filtered residual series.
pub fn loglik_residuals(eps: &[f64], p: &TParams) -> f64 {
    let inv = 1.0 / (p.eta * p.eta * p.nu);
    let sum: f64 = eps.iter().map(|e| (e * e * inv).ln_1p()).sum();
    eps.len() as f64 * p.log_norm_const() - 0.5 * (p.nu + 1.0) * sum
}

/// Draws of `eta * Z / sqrt(G / nu)` with `Z ~ N(0, 1)` and
/// `G ~ Gamma(shape nu/2, scale 2)`.
#[derive(Debug, Clone, Copy)]
pub struct TSampler {
    eta: f64,
    nu: f64,
    chi2: Gamma<f64>,
}

impl TSampler {
    pub fn new(p: &TParams) -> Result<Self> {
        let p = TParams::new(p.nu, p.eta)?;
        let chi2 = Gamma::new(0.5 * p.nu, 2.0).map_err(|e| MarError::Domain(e.to_string()))?;
        Ok(Self { eta: p.eta, nu: p.nu, chi2 })
    }
}

impl Distribution<f64> for TSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        let g = self.chi2.sample(rng);
        self.eta * z / (g / self.nu).sqrt()
    }
}

/// `n` i.i.d. draws, deterministic given `seed`.
pub fn sample(n: usize, p: &TParams, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(MarError::InvalidInput("sample size must be at least 1".into()));
    }
    let sampler = TSampler::new(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| sampler.sample(&mut rng)).collect())
}

/// `nu (nu + 1) / ((nu - 2)(nu + 3))`, defined for `nu > 2`.
pub fn fisher_j(nu: f64) -> Result<f64> {
    if !(nu > 2.0) {
        return Err(MarError::InfiniteVariance { nu });
    }
    Ok(nu * (nu + 1.0) / ((nu - 2.0) * (nu + 3.0)))
}

/// `(nu + 1) / ((nu + 3) eta^2)`; finite for every `nu > 0`.
pub fn fisher_j_tilde(p: &TParams) -> f64 {
    (p.nu + 1.0) / ((p.nu + 3.0) * p.eta * p.eta)
}

pub fn error_variance(p: &TParams) -> ErrorVariance {
    if p.nu > 2.0 {
        ErrorVariance::Finite(p.eta * p.eta * p.nu / (p.nu - 2.0))
    } else {
        ErrorVariance::Infinite
    }
}
