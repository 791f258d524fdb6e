//! Fit report: JSON document and a plain-text table.

use std::fmt::Write as _;

use mar_core::estimator::{Centering, FitResult, InfoCriterion, RsCandidate};
use mar_core::infer::{coefficient_standard_errors, omega_standard_errors, robust_sigma, SeInputs, SeMethod};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
pub struct ModelOut {
    pub r: usize,
    pub s: usize,
    pub phi: Vec<f64>,
    pub vphi: Vec<f64>,
    pub nu: f64,
    pub eta: f64,
}

#[derive(Debug, Serialize)]
pub struct CoefSe {
    pub phi: Vec<f64>,
    pub vphi: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct SeOut {
    pub classic: Option<CoefSe>,
    pub block_hessian: Option<CoefSe>,
    pub robust: Option<CoefSe>,
    /// Standard errors of `nu` and `eta`.
    pub omega: Option<OmegaSe>,
}

#[derive(Debug, Serialize)]
pub struct OmegaSe {
    pub nu: f64,
    pub eta: f64,
}

#[derive(Debug, Serialize)]
pub struct KstarOut {
    pub value: f64,
    pub source: String,
}

#[derive(Debug, Serialize)]
pub struct Diagnostics {
    pub t: usize,
    pub centering: Centering,
    /// Location removed before fitting.
    pub location: f64,
    pub p: usize,
    pub p_selected_by: Option<InfoCriterion>,
    pub rs_candidates: Vec<RsCandidate>,
    pub converged: bool,
    pub evaluations: usize,
    pub kstar: Option<KstarOut>,
    pub robust_sigma: Option<f64>,
    /// Reason per standard-error construction that produced `null`.
    pub unavailable: Vec<Unavailable>,
}

#[derive(Debug, Serialize)]
pub struct Unavailable {
    pub method: String,
    pub reason: String,
}

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub meta: Meta,
    pub model: ModelOut,
    pub loglik: f64,
    pub se: SeOut,
    pub diagnostics: Diagnostics,
}

pub struct Selection {
    pub p_selected_by: Option<InfoCriterion>,
    pub candidates: Vec<RsCandidate>,
}

fn reason(err: &mar_core::MarError) -> String {
    match err {
        mar_core::MarError::InfiniteVariance { .. } => "nu<=2".to_string(),
        other => other.to_string(),
    }
}

pub fn build(
    meta: Meta,
    y: &[f64],
    fit: &FitResult,
    centering: Centering,
    selection: Selection,
    kstar: Result<(f64, String), String>,
) -> FitReport {
    let m = &fit.model;
    let mut unavailable = Vec::new();
    let inputs = match &kstar {
        Ok((k, _)) => SeInputs::new(y, fit).with_kstar(*k),
        Err(_) => SeInputs::new(y, fit),
    };
    let mut coef = |method: SeMethod| -> Option<CoefSe> {
        if method == SeMethod::Robust {
            if let Err(why) = &kstar {
                unavailable.push(Unavailable { method: method.to_string(), reason: why.clone() });
                return None;
            }
        }
        match coefficient_standard_errors(&inputs, method) {
            Ok((phi, vphi)) => Some(CoefSe { phi, vphi }),
            Err(e) => {
                unavailable.push(Unavailable { method: method.to_string(), reason: reason(&e) });
                None
            }
        }
    };
    let classic = coef(SeMethod::Classic);
    let block_hessian = coef(SeMethod::BlockHessian);
    let robust = coef(SeMethod::Robust);
    let omega = match omega_standard_errors(y, fit, inputs.step) {
        Ok((nu, eta)) => Some(OmegaSe { nu, eta }),
        Err(e) => {
            unavailable.push(Unavailable { method: "omega".into(), reason: reason(&e) });
            None
        }
    };
    let robust_sigma = kstar.as_ref().ok().and_then(|(k, _)| robust_sigma(&fit.residuals, *k).ok());
    FitReport {
        meta,
        model: ModelOut {
            r: m.r(),
            s: m.s(),
            phi: m.phi.coeffs().to_vec(),
            vphi: m.vphi.coeffs().to_vec(),
            nu: m.dist.nu,
            eta: m.dist.eta,
        },
        loglik: fit.loglik,
        se: SeOut { classic, block_hessian, robust, omega },
        diagnostics: Diagnostics {
            t: fit.t,
            centering,
            location: fit.mean,
            p: m.p(),
            p_selected_by: selection.p_selected_by,
            rs_candidates: selection.candidates,
            converged: fit.converged,
            evaluations: fit.evals,
            kstar: kstar.ok().map(|(value, source)| KstarOut { value, source }),
            robust_sigma,
            unavailable,
        },
    }
}

/// Estimates with standard errors in parentheses, `/` where a construction
/// is undefined.
pub fn render_table(report: &FitReport) -> String {
    let mut out = String::new();
    let m = &report.model;
    let _ = writeln!(out, "MAR({},{})  T = {}  log-likelihood = {:.4}", m.r, m.s, report.diagnostics.t, report.loglik);
    let _ = writeln!(out, "{:<10}{:>12}{:>14}{:>16}{:>14}", "", "estimate", "classic", "block_hessian", "robust");
    let cell = |se: &Option<CoefSe>, causal: bool, i: usize| match se {
        Some(c) => format!("({:.4})", if causal { c.phi[i] } else { c.vphi[i] }),
        None => "/".to_string(),
    };
    for (i, v) in m.phi.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:<10}{:>12.4}{:>14}{:>16}{:>14}",
            format!("phi_{}", i + 1),
            v,
            cell(&report.se.classic, true, i),
            cell(&report.se.block_hessian, true, i),
            cell(&report.se.robust, true, i)
        );
    }
    for (i, v) in m.vphi.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:<10}{:>12.4}{:>14}{:>16}{:>14}",
            format!("varphi_{}", i + 1),
            v,
            cell(&report.se.classic, false, i),
            cell(&report.se.block_hessian, false, i),
            cell(&report.se.robust, false, i)
        );
    }
    let omega = |pick: fn(&OmegaSe) -> f64| report.se.omega.as_ref().map_or("/".to_string(), |o| format!("({:.4})", pick(o)));
    let _ = writeln!(out, "{:<10}{:>12.4}{:>14}", "nu", m.nu, omega(|o| o.nu));
    let _ = writeln!(out, "{:<10}{:>12.4}{:>14}", "eta", m.eta, omega(|o| o.eta));
    if let Some(k) = &report.diagnostics.kstar {
        let _ = writeln!(out, "k* = {:.4} ({})", k.value, k.source);
    }
    for u in &report.diagnostics.unavailable {
        let _ = writeln!(out, "{} not available: {}", u.method, u.reason);
    }
    out
}
