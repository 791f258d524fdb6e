//! Standard errors of the causal and noncausal coefficients.
//!
//! Three information matrices are available for `(phi, varphi)`:
//!
//! * **classic** `Sigma`: `[[J G_U, G_UV], [G_VU, J G_V]]` with
//!   `J = nu (nu+1) / ((nu-2)(nu+3))`; undefined for `nu <= 2`.
//! * **block Hessian** `Sigma_D`: the observed Hessian of the log-likelihood
//!   in `phi` (holding `varphi, nu, eta` fixed) and in `varphi` (holding
//!   `phi, nu, eta` fixed), assembled block-diagonally.
//! * **robust** `Sigma_R`: like `Sigma` with `J` replaced by
//!   `sigma_hat^2 J~(nu, eta)` and `sigma_hat = k* MAD(residuals)`, which is
//!   finite for every `nu > 0`.
//!
//! All matrices are per-observation information; standard errors divide the
//! inverse by `T - p`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{MarError, Result};
use crate::estimator::FitResult;
use crate::lagpoly::{mar_filter_into, LagPolynomial};
use crate::model::MarModel;
use crate::robustscale::mad;
use crate::tdist::{fisher_j, fisher_j_tilde, loglik_residuals, TParams};

pub const DEFAULT_GAMMA_TOL: f64 = 1e-14;
pub const DEFAULT_HESSIAN_STEP: f64 = 1e-4;
const MAX_MA_TERMS: usize = 200_000;

/// Covariances of the lagged unit-innovation AR processes `u*` and `v*`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaBlocks {
    pub gamma_u: DMatrix<f64>,
    pub gamma_v: DMatrix<f64>,
    pub gamma_uv: DMatrix<f64>,
    /// Length of the longer MA expansion used in the sums.
    pub truncation: usize,
}

pub fn gamma_blocks(phi: &LagPolynomial, vphi: &LagPolynomial, tol: f64) -> Result<GammaBlocks> {
    let psi = phi.ma_weights(tol, MAX_MA_TERMS)?.weights;
    let kappa = vphi.ma_weights(tol, MAX_MA_TERMS)?.weights;
    let (r, s) = (phi.degree(), vphi.degree());

    // sum_m a_m b_{m + lag}
    let cross = |a: &[f64], b: &[f64], lag: usize| -> f64 {
        a.iter().zip(b.iter().skip(lag)).map(|(x, y)| x * y).sum()
    };
    let gamma_u = DMatrix::from_fn(r, r, |i, j| cross(&psi, &psi, i.abs_diff(j)));
    let gamma_v = DMatrix::from_fn(s, s, |i, j| cross(&kappa, &kappa, i.abs_diff(j)));
    let gamma_uv = DMatrix::from_fn(r, s, |i, j| {
        if i >= j {
            cross(&psi, &kappa, i - j)
        } else {
            cross(&kappa, &psi, j - i)
        }
    });
    Ok(GammaBlocks { gamma_u, gamma_v, gamma_uv, truncation: psi.len().max(kappa.len()) })
}

/// `[[c G_U, G_UV], [G_UV', c G_V]]`.
fn assemble(blocks: &GammaBlocks, diag_scale: f64) -> DMatrix<f64> {
    let (r, s) = (blocks.gamma_u.nrows(), blocks.gamma_v.nrows());
    let mut m = DMatrix::zeros(r + s, r + s);
    m.view_mut((0, 0), (r, r)).copy_from(&(&blocks.gamma_u * diag_scale));
    m.view_mut((r, r), (s, s)).copy_from(&(&blocks.gamma_v * diag_scale));
    m.view_mut((0, r), (r, s)).copy_from(&blocks.gamma_uv);
    m.view_mut((r, 0), (s, r)).copy_from(&blocks.gamma_uv.transpose());
    m
}

pub fn sigma_classic(model: &MarModel, blocks: &GammaBlocks) -> Result<DMatrix<f64>> {
    let j = fisher_j(model.dist.nu)?;
    Ok(assemble(blocks, j))
}

/// `k* MAD(residuals)`.
pub fn robust_sigma(residuals: &[f64], kstar: f64) -> Result<f64> {
    if !(kstar > 0.0 && kstar.is_finite()) {
        return Err(MarError::InvalidInput(format!("k* must be positive, got {kstar}")));
    }
    let m = mad(residuals)?;
    if !(m > 0.0) {
        return Err(MarError::Degenerate("residuals have zero median absolute deviation".into()));
    }
    Ok(kstar * m)
}

pub fn sigma_robust(fit: &FitResult, kstar: f64, blocks: &GammaBlocks) -> Result<DMatrix<f64>> {
    let sigma = robust_sigma(&fit.residuals, kstar)?;
    Ok(assemble(blocks, sigma * sigma * fisher_j_tilde(&fit.model.dist)))
}

/// Central-difference Hessian of `f` at `x` with per-coordinate steps `h`.
pub fn numerical_hessian<F>(mut f: F, x: &[f64], h: &[f64]) -> DMatrix<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x.len();
    let f0 = f(x);
    let mut m = DMatrix::zeros(n, n);
    let mut p = x.to_vec();
    for i in 0..n {
        p[i] = x[i] + h[i];
        let fp = f(&p);
        p[i] = x[i] - h[i];
        let fm = f(&p);
        p[i] = x[i];
        m[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let mut corner = |si: f64, sj: f64| {
                p[i] = x[i] + si * h[i];
                p[j] = x[j] + sj * h[j];
                let v = f(&p);
                p[i] = x[i];
                p[j] = x[j];
                v
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0))
                / (4.0 * h[i] * h[j]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Steps `step * max(1, |x_i|)`.
pub fn hessian_steps(x: &[f64], step: f64) -> Vec<f64> {
    x.iter().map(|v| step * v.abs().max(1.0)).collect()
}

/// Largest relative change of the Hessian entries when the step is halved.
pub fn richardson_discrepancy<F>(mut f: F, x: &[f64], step: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    let a = numerical_hessian(&mut f, x, &hessian_steps(x, step));
    let b = numerical_hessian(&mut f, x, &hessian_steps(x, step / 2.0));
    let scale = b.amax().max(f64::MIN_POSITIVE);
    (a - b).amax() / scale
}

/// Log-likelihood in natural parameters `(phi, varphi, nu, eta)` evaluated
/// without admissibility checks, for numerical differentiation.
struct RawLoglik {
    y: Vec<f64>,
    r: usize,
    s: usize,
    buf: Vec<f64>,
}

impl RawLoglik {
    fn new(y: &[f64], fit: &FitResult) -> Self {
        Self { y: fit.centered(y), r: fit.r(), s: fit.s(), buf: Vec::new() }
    }

    fn eval(&mut self, theta: &[f64]) -> f64 {
        let (phi, rest) = theta.split_at(self.r);
        let (vphi, dist) = rest.split_at(self.s);
        let p = TParams { nu: dist[0], eta: dist[1] };
        if !(p.nu > 0.0 && p.eta > 0.0) {
            return f64::NAN;
        }
        mar_filter_into(&self.y, phi, vphi, &mut self.buf);
        loglik_residuals(&self.buf, &p)
    }
}

fn natural_theta(fit: &FitResult) -> Vec<f64> {
    let m = &fit.model;
    let mut x = m.phi.coeffs().to_vec();
    x.extend_from_slice(m.vphi.coeffs());
    x.push(m.dist.nu);
    x.push(m.dist.eta);
    x
}

/// Hessian of the log-likelihood with respect to the coordinates `idx` of
/// the natural parameter vector, the others held at the estimate.
fn sub_hessian(y: &[f64], fit: &FitResult, idx: &[usize], step: f64) -> DMatrix<f64> {
    let theta = natural_theta(fit);
    let mut ll = RawLoglik::new(y, fit);
    let sub: Vec<f64> = idx.iter().map(|&i| theta[i]).collect();
    let mut full = theta.clone();
    numerical_hessian(
        |z| {
            for (k, &i) in idx.iter().enumerate() {
                full[i] = z[k];
            }
            ll.eval(&full)
        },
        &sub,
        &hessian_steps(&sub, step),
    )
}

fn check_sample(y: &[f64], fit: &FitResult) -> Result<()> {
    if y.len() != fit.t {
        return Err(MarError::InvalidInput(format!(
            "series length {} does not match the fitted sample size {}",
            y.len(),
            fit.t
        )));
    }
    if fit.t_eff() == 0 {
        return Err(MarError::InvalidInput("no effective observations".into()));
    }
    Ok(())
}

/// Block-diagonal observed information of `(phi, varphi)`, per observation.
pub fn sigma_block_hessian(y: &[f64], fit: &FitResult, step: f64) -> Result<DMatrix<f64>> {
    check_sample(y, fit)?;
    let (r, s) = (fit.r(), fit.s());
    let n = fit.t_eff() as f64;
    let mut m = DMatrix::zeros(r + s, r + s);
    for (name, offset, len) in [("causal", 0, r), ("noncausal", r, s)] {
        if len == 0 {
            continue;
        }
        let idx: Vec<usize> = (offset..offset + len).collect();
        let block = -sub_hessian(y, fit, &idx, step) / n;
        if block.clone().cholesky().is_none() {
            return Err(MarError::Singular(format!("{name} Hessian block is not positive definite")));
        }
        m.view_mut((offset, offset), (len, len)).copy_from(&block);
    }
    Ok(m)
}

/// `sqrt(diag(info^-1) / (T - p))`.
pub fn standard_errors(info: &DMatrix<f64>, t: usize, p: usize) -> Result<Vec<f64>> {
    if t <= p {
        return Err(MarError::InvalidInput(format!("T = {t} must exceed p = {p}")));
    }
    if info.nrows() != info.ncols() {
        return Err(MarError::InvalidInput("information matrix must be square".into()));
    }
    if info.nrows() == 0 {
        return Ok(Vec::new());
    }
    let inv = info
        .clone()
        .try_inverse()
        .ok_or_else(|| MarError::Singular("information matrix is singular".into()))?;
    let n = (t - p) as f64;
    inv.diagonal()
        .iter()
        .map(|v| {
            if *v > 0.0 && v.is_finite() {
                Ok((v / n).sqrt())
            } else {
                Err(MarError::Singular(format!("non-positive variance {v} in inverse information")))
            }
        })
        .collect()
}

/// Standard errors of `(nu, eta)` from the observed information of the
/// distributional parameters.
pub fn omega_standard_errors(y: &[f64], fit: &FitResult, step: f64) -> Result<(f64, f64)> {
    check_sample(y, fit)?;
    let p = fit.model.p();
    let info = omega_information(y, fit, step)?;
    let se = standard_errors(&info, fit.t, p)?;
    Ok((se[0], se[1]))
}

/// `-(T - p)^-1` times the Hessian in `(nu, eta)`.
pub fn omega_information(y: &[f64], fit: &FitResult, step: f64) -> Result<DMatrix<f64>> {
    check_sample(y, fit)?;
    let p = fit.model.p();
    let h = sub_hessian(y, fit, &[p, p + 1], step);
    Ok(-h / fit.t_eff() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeMethod {
    Classic,
    BlockHessian,
    Robust,
}

impl SeMethod {
    pub const ALL: [SeMethod; 3] = [SeMethod::Classic, SeMethod::BlockHessian, SeMethod::Robust];

    pub fn name(&self) -> &'static str {
        match self {
            SeMethod::Classic => "classic",
            SeMethod::BlockHessian => "block_hessian",
            SeMethod::Robust => "robust",
        }
    }
}

impl std::fmt::Display for SeMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SeMethod {
    type Err = MarError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classic" => Ok(SeMethod::Classic),
            "block_hessian" | "block-hessian" => Ok(SeMethod::BlockHessian),
            "robust" => Ok(SeMethod::Robust),
            other => Err(MarError::InvalidInput(format!("unknown standard-error method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeReport {
    pub method: SeMethod,
    pub se_phi: Vec<f64>,
    pub se_vphi: Vec<f64>,
    pub se_nu: f64,
    pub se_eta: f64,
    #[serde(serialize_with = "serialize_matrix")]
    pub info_matrix: DMatrix<f64>,
}

fn serialize_matrix<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for i in 0..m.nrows() {
        let row: Vec<f64> = m.row(i).iter().copied().collect();
        seq.serialize_element(&row)?;
    }
    seq.end()
}

/// Inputs shared by the three constructions for one fitted model.
#[derive(Debug, Clone)]
pub struct SeInputs<'a> {
    pub y: &'a [f64],
    pub fit: &'a FitResult,
    pub step: f64,
    pub gamma_tol: f64,
    /// Required for [`SeMethod::Robust`].
    pub kstar: Option<f64>,
}

impl<'a> SeInputs<'a> {
    pub fn new(y: &'a [f64], fit: &'a FitResult) -> Self {
        Self { y, fit, step: DEFAULT_HESSIAN_STEP, gamma_tol: DEFAULT_GAMMA_TOL, kstar: None }
    }

    pub fn with_kstar(mut self, kstar: f64) -> Self {
        self.kstar = Some(kstar);
        self
    }
}

/// Information matrix of `(phi, varphi)` for one method.
pub fn information(inputs: &SeInputs<'_>, method: SeMethod) -> Result<DMatrix<f64>> {
    let fit = inputs.fit;
    let blocks = || gamma_blocks(&fit.model.phi, &fit.model.vphi, inputs.gamma_tol);
    match method {
        SeMethod::Classic => sigma_classic(&fit.model, &blocks()?),
        SeMethod::BlockHessian => sigma_block_hessian(inputs.y, fit, inputs.step),
        SeMethod::Robust => {
            let kstar = inputs
                .kstar
                .ok_or_else(|| MarError::InvalidInput("robust standard errors need k*".into()))?;
            sigma_robust(fit, kstar, &blocks()?)
        }
    }
}

/// Coefficient standard errors only; skips the `(nu, eta)` Hessian.
pub fn coefficient_standard_errors(inputs: &SeInputs<'_>, method: SeMethod) -> Result<(Vec<f64>, Vec<f64>)> {
    let fit = inputs.fit;
    let info = information(inputs, method)?;
    let se = standard_errors(&info, fit.t, fit.model.p())?;
    let (phi, vphi) = se.split_at(fit.r());
    Ok((phi.to_vec(), vphi.to_vec()))
}

pub fn se_report(inputs: &SeInputs<'_>, method: SeMethod) -> Result<SeReport> {
    let fit = inputs.fit;
    let info = information(inputs, method)?;
    let se = standard_errors(&info, fit.t, fit.model.p())?;
    let (se_nu, se_eta) = omega_standard_errors(inputs.y, fit, inputs.step)?;
    Ok(SeReport {
        method,
        se_phi: se[..fit.r()].to_vec(),
        se_vphi: se[fit.r()..].to_vec(),
        se_nu,
        se_eta,
        info_matrix: info,
    })
}

/// Critical value of the two-sided 5% test.
pub const CRITICAL_5PCT: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub stat: f64,
    pub reject: bool,
}

/// `(estimate - null) / se`, rejecting when `|stat| > 1.96`.
pub fn t_test(estimate: f64, null_value: f64, se: f64) -> Result<TTest> {
    t_test_with_critical(estimate, null_value, se, CRITICAL_5PCT)
}

pub fn t_test_with_critical(estimate: f64, null_value: f64, se: f64, critical: f64) -> Result<TTest> {
    if !(se > 0.0 && se.is_finite()) {
        return Err(MarError::Degenerate(format!("standard error must be positive, got {se}")));
    }
    let stat = (estimate - null_value) / se;
    Ok(TTest { stat, reject: stat.abs() > critical })
}

/// Two-sided normal critical value for a nominal level; 1.96 at 5%.
pub fn critical_value(level: f64) -> Result<f64> {
    if !(level > 0.0 && level <= 1.0) {
        return Err(MarError::InvalidInput(format!("nominal level must lie in (0, 1], got {level}")));
    }
    if (level - 0.05).abs() < 1e-12 {
        return Ok(CRITICAL_5PCT);
    }
    if level == 1.0 {
        return Ok(0.0);
    }
    use statrs::distribution::{ContinuousCDF, Normal};
    let n = Normal::standard();
    Ok(n.inverse_cdf(1.0 - level / 2.0))
}
