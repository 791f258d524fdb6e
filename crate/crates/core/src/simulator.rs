//! Sample paths of MAR(r, s) processes with Student's t innovations.
//!
//! The noncausal half is solved backwards from a zero tail and the causal
//! half forwards from a zero head; `burn` extra innovations on each side
//! absorb the start-up transient.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MarError, Result};
use crate::lagpoly::mar_filter_into;
use crate::model::MarModel;
use crate::rng::replication_rng;
use crate::tdist::TSampler;

pub const DEFAULT_BURN: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub t: usize,
    pub model: MarModel,
    pub burn: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(t: usize, model: MarModel, seed: u64) -> Self {
        Self { t, model, burn: DEFAULT_BURN, seed }
    }

    fn validate(&self) -> Result<()> {
        if self.t == 0 {
            return Err(MarError::InvalidInput("sample size T must be at least 1".into()));
        }
        self.model.check_stationary()
    }
}

/// The `T + 2 burn` innovations behind [`simulate_mar`], in time order.
///
/// The central `T` draws come from one stream; the head and tail segments
/// are drawn outward from the centre on two further streams, so a longer
/// burn-in only prepends/appends draws and never changes the central ones.
pub fn innovations(cfg: &SimConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let sampler = TSampler::new(&cfg.model.dist)?;
    let (t, burn) = (cfg.t, cfg.burn);
    let mut eps = vec![0.0; t + 2 * burn];

    let mut central = replication_rng(cfg.seed, 0);
    for e in &mut eps[burn..burn + t] {
        *e = central.sample(sampler);
    }
    let mut head = replication_rng(cfg.seed, 1);
    for e in eps[..burn].iter_mut().rev() {
        *e = head.sample(sampler);
    }
    let mut tail = replication_rng(cfg.seed, 2);
    for e in &mut eps[burn + t..] {
        *e = tail.sample(sampler);
    }
    Ok(eps)
}

/// Solves `phi(L) varphi(L^-1) y_t = eps_t` over the whole innovation vector
/// with zero initial and terminal conditions.
pub fn mar_recursion(eps: &[f64], model: &MarModel) -> Vec<f64> {
    let n = eps.len();
    let vphi = model.vphi.coeffs();
    let phi = model.phi.coeffs();

    // w_t = eps_t + sum_i varphi_i w_{t+i}
    let mut w = eps.to_vec();
    for t in (0..n).rev() {
        let lead: f64 = vphi
            .iter()
            .enumerate()
            .filter(|(i, _)| t + 1 + i < n)
            .map(|(i, c)| c * w[t + 1 + i])
            .sum();
        w[t] += lead;
    }
    // y_t = w_t + sum_i phi_i y_{t-i}
    let mut y = w;
    for t in 0..n {
        let lag: f64 = phi
            .iter()
            .enumerate()
            .filter(|(i, _)| *i < t)
            .map(|(i, c)| c * y[t - 1 - i])
            .sum();
        y[t] += lag;
    }
    y
}

pub fn simulate_mar(cfg: &SimConfig) -> Result<Vec<f64>> {
    let eps = innovations(cfg)?;
    let y = mar_recursion(&eps, &cfg.model);
    Ok(y[cfg.burn..cfg.burn + cfg.t].to_vec())
}

/// `phi(L) varphi(L^-1) y_t` for `t = r+1 .. T-s`.
pub fn residuals(y: &[f64], model: &MarModel) -> Result<Vec<f64>> {
    if y.len() <= model.p() {
        return Err(MarError::InvalidInput(format!(
            "series of length {} is too short for a MAR({},{})",
            y.len(),
            model.r(),
            model.s()
        )));
    }
    let mut out = Vec::with_capacity(y.len());
    mar_filter_into(y, model.phi.coeffs(), model.vphi.coeffs(), &mut out);
    Ok(out)
}
