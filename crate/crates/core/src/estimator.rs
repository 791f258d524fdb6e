//! Approximate maximum likelihood for MAR(r, s) models and the OLS-based
//! order selection that precedes it.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{MarError, Result};
use crate::lagpoly::{is_stationary_coeffs, mar_filter_into, LagPolynomial};
pub use crate::model::MarModel;
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::robustscale::{mad, median};
use crate::tdist::{loglik_residuals, TParams};

// ---------------------------------------------------------------------------
// OLS autoregressions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfoCriterion {
    Aic,
    Bic,
}

impl std::str::FromStr for InfoCriterion {
    type Err = MarError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aic" => Ok(Self::Aic),
            "bic" => Ok(Self::Bic),
            other => Err(MarError::InvalidInput(format!("unknown information criterion '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArFit {
    pub coeffs: Vec<f64>,
    /// Maximum-likelihood residual variance `RSS / n`.
    pub sigma2: f64,
    pub aic: f64,
    pub bic: f64,
    /// Number of observations used in the regression.
    pub nobs: usize,
}

impl ArFit {
    pub fn criterion(&self, c: InfoCriterion) -> f64 {
        match c {
            InfoCriterion::Aic => self.aic,
            InfoCriterion::Bic => self.bic,
        }
    }
}

fn demeaned(y: &[f64]) -> Vec<f64> {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| v - mean).collect()
}

/// Regresses `y_t` on `y_{t-1}, ..., y_{t-p}` for `t = start .. T` (0-based).
fn ols_ar(yc: &[f64], p: usize, start: usize) -> Result<ArFit> {
    let n = yc.len() - start;
    let (coeffs, rss) = if p == 0 {
        (Vec::new(), yc[start..].iter().map(|v| v * v).sum::<f64>())
    } else {
        let x = DMatrix::from_fn(n, p, |row, col| yc[start + row - 1 - col]);
        let target = DVector::from_iterator(n, yc[start..].iter().copied());
        let xtx = x.transpose() * &x;
        let xty = x.transpose() * &target;
        let beta = xtx
            .cholesky()
            .ok_or_else(|| MarError::Singular(format!("AR({p}) design matrix")))?
            .solve(&xty);
        let resid = &target - &x * &beta;
        (beta.iter().copied().collect(), resid.norm_squared())
    };
    let sigma2 = rss / n as f64;
    if !(sigma2 > 0.0) {
        return Err(MarError::Degenerate("AR residual variance is zero".into()));
    }
    let nf = n as f64;
    let neg2ll = nf * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);
    Ok(ArFit {
        coeffs,
        sigma2,
        aic: neg2ll + 2.0 * p as f64,
        bic: neg2ll + p as f64 * nf.ln(),
        nobs: n,
    })
}

/// Least-squares AR(p) on the demeaned series, with Gaussian AIC/BIC.
pub fn fit_ar_ols(y: &[f64], p: usize) -> Result<ArFit> {
    if y.len() <= 2 * p + 1 {
        return Err(MarError::InvalidInput(format!(
            "series of length {} is too short for an AR({p}) regression",
            y.len()
        )));
    }
    ols_ar(&demeaned(y), p, p)
}

/// Order `p in 1..=p_max` minimizing the criterion; ties go to the smaller order.
///
/// All candidate regressions share the estimation sample `t = p_max+1 .. T`
/// so the criteria are comparable.
pub fn select_p(y: &[f64], p_max: usize, criterion: InfoCriterion) -> Result<usize> {
    if p_max == 0 {
        return Err(MarError::InvalidInput("p_max must be at least 1".into()));
    }
    if y.len() <= 2 * p_max + 1 {
        return Err(MarError::InvalidInput(format!(
            "series of length {} is too short for p_max = {p_max}",
            y.len()
        )));
    }
    let yc = demeaned(y);
    let mut best = (1, f64::INFINITY);
    for p in 1..=p_max {
        let value = ols_ar(&yc, p, p_max)?.criterion(criterion);
        if value < best.1 {
            best = (p, value);
        }
    }
    Ok(best.0)
}

// ---------------------------------------------------------------------------
// Approximate maximum likelihood
// ---------------------------------------------------------------------------

/// Location removed before the likelihood is maximized. The model itself
/// has no intercept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Centering {
    Mean,
    /// Robust to the single huge draws that dominate the mean when `nu` is small.
    Median,
    None,
}

impl std::str::FromStr for Centering {
    type Err = MarError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mean" => Ok(Self::Mean),
            "median" => Ok(Self::Median),
            "none" => Ok(Self::None),
            other => Err(MarError::InvalidInput(format!("unknown centering '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Random perturbations added to the OLS-based start points.
    pub random_starts: usize,
    pub seed: u64,
    /// Location removed from the series before fitting.
    pub centering: Centering,
    /// Simplex diameter (in the transformed parameters) that counts as converged.
    pub xtol: f64,
    pub max_evals: usize,
    /// Search region for the degrees of freedom.
    pub nu_bounds: (f64, f64),
    pub nu_start: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            random_starts: 4,
            seed: 0,
            centering: Centering::Mean,
            xtol: 1e-8,
            max_evals: 20_000,
            nu_bounds: (0.55, 100.0),
            nu_start: 2.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub model: MarModel,
    pub loglik: f64,
    /// `phi(L) varphi(L^-1)` applied to the (demeaned) series; length `T - r - s`.
    pub residuals: Vec<f64>,
    /// Length of the input series.
    pub t: usize,
    /// Location removed from the series before fitting.
    pub mean: f64,
    pub converged: bool,
    pub n_starts_used: usize,
    pub evals: usize,
}

impl FitResult {
    pub fn r(&self) -> usize {
        self.model.r()
    }

    pub fn s(&self) -> usize {
        self.model.s()
    }

    /// Effective sample size `T - p`.
    pub fn t_eff(&self) -> usize {
        self.t - self.model.p()
    }

    /// The series the model was fitted to.
    pub fn centered(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| v - self.mean).collect()
    }

    /// Transformed parameter vector `(phi, varphi, ln nu, ln eta)`.
    pub fn theta(&self) -> Vec<f64> {
        pack(&self.model)
    }
}

fn pack(m: &MarModel) -> Vec<f64> {
    let mut x = Vec::with_capacity(m.p() + 2);
    x.extend_from_slice(m.phi.coeffs());
    x.extend_from_slice(m.vphi.coeffs());
    x.push(m.dist.nu.ln());
    x.push(m.dist.eta.ln());
    x
}

/// Negative log-likelihood over `(phi, varphi, ln nu, ln eta)`, `+inf`
/// outside the admissible region.
struct Objective<'a> {
    y: &'a [f64],
    r: usize,
    s: usize,
    ln_nu_bounds: (f64, f64),
    buf: Vec<f64>,
}

impl<'a> Objective<'a> {
    fn new(y: &'a [f64], r: usize, s: usize, nu_bounds: (f64, f64)) -> Self {
        Self {
            y,
            r,
            s,
            ln_nu_bounds: (nu_bounds.0.ln(), nu_bounds.1.ln()),
            buf: Vec::with_capacity(y.len()),
        }
    }

    fn value(&mut self, x: &[f64]) -> f64 {
        let (phi, rest) = x.split_at(self.r);
        let (vphi, dist) = rest.split_at(self.s);
        let (ln_nu, ln_eta) = (dist[0], dist[1]);
        if !(ln_nu >= self.ln_nu_bounds.0 && ln_nu <= self.ln_nu_bounds.1) || !ln_eta.is_finite() {
            return f64::INFINITY;
        }
        if !is_stationary_coeffs(phi) || !is_stationary_coeffs(vphi) {
            return f64::INFINITY;
        }
        let p = TParams { nu: ln_nu.exp(), eta: ln_eta.exp() };
        mar_filter_into(self.y, phi, vphi, &mut self.buf);
        -loglik_residuals(&self.buf, &p)
    }
}

fn shrink_to_stationary(c: &mut [f64]) {
    while !is_stationary_coeffs(c) {
        c.iter_mut().for_each(|v| *v *= 0.9);
    }
}

fn ar_coeffs(series: &[f64], order: usize) -> Vec<f64> {
    if order == 0 {
        return Vec::new();
    }
    let mut c = if series.len() > 2 * order + 1 {
        ols_ar(series, order, order).map(|f| f.coeffs).unwrap_or_else(|_| vec![0.0; order])
    } else {
        vec![0.0; order]
    };
    shrink_to_stationary(&mut c);
    c
}

fn reversed(y: &[f64]) -> Vec<f64> {
    y.iter().rev().copied().collect()
}

/// `1.4826 * MAD`, falling back to the standard deviation and then to 1.
fn robust_scale(x: &[f64]) -> f64 {
    let m = mad(x).unwrap_or(0.0) * 1.4826;
    if m > 0.0 && m.is_finite() {
        return m;
    }
    let mean = x.iter().sum::<f64>() / x.len().max(1) as f64;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if sd > 0.0 && sd.is_finite() {
        sd
    } else {
        1.0
    }
}

/// Deterministic start points: causal-first and noncausal-first OLS splits,
/// then random perturbations of them.
fn start_points(yc: &[f64], r: usize, s: usize, opts: &FitOptions) -> Vec<Vec<f64>> {
    let mut splits: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();

    let phi_a = ar_coeffs(yc, r);
    let u = LagPolynomial::new(phi_a.clone())
        .expect("finite")
        .filter_causal(yc)
        .unwrap_or_else(|_| yc.to_vec());
    let vphi_a = ar_coeffs(&reversed(&u), s);
    splits.push((phi_a, vphi_a));

    if r > 0 && s > 0 {
        let vphi_b = ar_coeffs(&reversed(yc), s);
        let w = LagPolynomial::new(vphi_b.clone())
            .expect("finite")
            .filter_noncausal(yc)
            .unwrap_or_else(|_| yc.to_vec());
        let phi_b = ar_coeffs(&w, r);
        splits.push((phi_b, vphi_b));
    }

    let mut starts = Vec::new();
    let mut buf = Vec::new();
    for (phi, vphi) in &splits {
        mar_filter_into(yc, phi, vphi, &mut buf);
        let eta = robust_scale(&buf);
        let mut x = phi.clone();
        x.extend_from_slice(vphi);
        x.push(opts.nu_start.ln());
        x.push(eta.ln());
        starts.push(x);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let base_count = starts.len();
    for k in 0..opts.random_starts {
        let mut x = starts[k % base_count].clone();
        for v in &mut x[..r + s] {
            *v += 0.3 * rng.sample::<f64, _>(StandardNormal);
        }
        shrink_to_stationary(&mut x[..r]);
        shrink_to_stationary(&mut x[r..r + s]);
        let (lo, hi) = (opts.nu_bounds.0.ln(), opts.nu_bounds.1.ln());
        x[r + s] = (x[r + s] + 0.5 * rng.sample::<f64, _>(StandardNormal)).clamp(lo + 1e-3, hi - 1e-3);
        x[r + s + 1] += 0.3 * rng.sample::<f64, _>(StandardNormal);
        starts.push(x);
    }
    starts
}

/// Fits a MAR(r, s) by maximizing the approximate t log-likelihood with a
/// multi-start Nelder-Mead search.
pub fn fit_mar(y: &[f64], r: usize, s: usize, opts: &FitOptions) -> Result<FitResult> {
    if y.len() <= r + s + 2 {
        return Err(MarError::InvalidInput(format!(
            "series of length {} is too short for a MAR({r},{s})",
            y.len()
        )));
    }
    if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
        return Err(MarError::InvalidInput(format!("non-finite observation {bad}")));
    }
    let mean = match opts.centering {
        Centering::Mean => y.iter().sum::<f64>() / y.len() as f64,
        Centering::Median => median(y)?,
        Centering::None => 0.0,
    };
    let yc: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let n = r + s + 2;

    let mut obj = Objective::new(&yc, r, s, opts.nu_bounds);
    let starts = start_points(&yc, r, s, opts);
    let mut step = vec![0.1; n];
    step[r + s] = 0.3;
    step[r + s + 1] = 0.2;

    let coarse = NelderMeadOptions { step: step.clone(), xtol: 1e-3, ftol: f64::INFINITY, max_evals: 600 };
    let mut evals = 0;
    let mut best: Option<(Vec<f64>, f64)> = None;
    for x0 in &starts {
        let res = nelder_mead(|x| obj.value(x), x0, &coarse);
        evals += res.evals;
        if res.value.is_finite() && best.as_ref().is_none_or(|b| res.value < b.1) {
            best = Some((res.x, res.value));
        }
    }
    let (mut x, mut value) = match best {
        Some(b) => b,
        None => {
            return Err(MarError::NonConvergence { best: starts[0].clone(), value: f64::INFINITY });
        }
    };

    // Polish, restarting the simplex until a restart no longer moves it.
    let fine = NelderMeadOptions {
        step: step.iter().map(|h| h * 0.25).collect(),
        xtol: opts.xtol,
        ftol: f64::INFINITY,
        max_evals: opts.max_evals,
    };
    let mut converged = false;
    for _ in 0..4 {
        let res = nelder_mead(|x| obj.value(x), &x, &fine);
        evals += res.evals;
        let improvement = value - res.value;
        let moved = res.x.iter().zip(&x).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        if res.value <= value {
            x = res.x;
            value = res.value;
        }
        converged = res.converged;
        if !converged || (improvement.abs() < 1e-10 * value.abs().max(1.0) && moved < 10.0 * opts.xtol) {
            break;
        }
    }

    let model = MarModel {
        phi: LagPolynomial::new(x[..r].to_vec())?,
        vphi: LagPolynomial::new(x[r..r + s].to_vec())?,
        dist: TParams::new(x[r + s].exp(), x[r + s + 1].exp())?,
    };
    let mut residuals = Vec::with_capacity(yc.len());
    mar_filter_into(&yc, model.phi.coeffs(), model.vphi.coeffs(), &mut residuals);
    let loglik = loglik_residuals(&residuals, &model.dist);
    Ok(FitResult {
        model,
        loglik,
        residuals,
        t: y.len(),
        mean,
        converged,
        n_starts_used: starts.len(),
        evals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RsCandidate {
    pub r: usize,
    pub s: usize,
    pub loglik: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RsSelection {
    pub r: usize,
    pub s: usize,
    pub fit: FitResult,
    pub candidates: Vec<RsCandidate>,
}

/// Fits every split `r + s = p` and keeps the likelihood maximizer; ties go
/// to the larger `r`.
pub fn select_rs(y: &[f64], p: usize, opts: &FitOptions) -> Result<RsSelection> {
    let mut best: Option<FitResult> = None;
    let mut candidates = Vec::with_capacity(p + 1);
    let mut last_err = None;
    for r in (0..=p).rev() {
        match fit_mar(y, r, p - r, opts) {
            Ok(fit) => {
                candidates.push(RsCandidate { r, s: p - r, loglik: fit.loglik });
                if best.as_ref().is_none_or(|b| fit.loglik > b.loglik) {
                    best = Some(fit);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some(fit) => Ok(RsSelection { r: fit.r(), s: fit.s(), fit, candidates }),
        None => Err(last_err.unwrap_or_else(|| MarError::InvalidInput("no candidate orders".into()))),
    }
}

/// Result of the full two-stage order selection.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    pub p: usize,
    pub criterion: InfoCriterion,
    pub selection: RsSelection,
}

/// OLS order selection for `p`, then the `(r, s)` likelihood search.
pub fn estimate_pipeline(
    y: &[f64],
    p_max: usize,
    criterion: InfoCriterion,
    opts: &FitOptions,
) -> Result<PipelineResult> {
    let p = select_p(y, p_max, criterion)?;
    let selection = select_rs(y, p, opts)?;
    Ok(PipelineResult { p, criterion, selection })
}
