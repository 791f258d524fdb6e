//! Monte-Carlo experiments: empirical rejection frequencies of coefficient
//! t-tests under the three standard-error constructions, and the growth of
//! the robust residual scale with the sample size.
//!
//! Every replication derives its seed from the master seed, the cell's `T`
//! and its own index, so tables are identical for any thread count.

use std::collections::BTreeMap;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MarError, Result};
use crate::estimator::{fit_mar, FitOptions, FitResult};
use crate::infer::{coefficient_standard_errors, critical_value, robust_sigma, t_test_with_critical, SeInputs, SeMethod};
use crate::model::MarModel;
use crate::robustscale::{calibrate_kstar, kstar_reference, quantile_sorted};
use crate::rng::derive_seed;
use crate::simulator::{simulate_mar, SimConfig, DEFAULT_BURN};

/// Data generating process of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub phi: Vec<f64>,
    pub vphi: Vec<f64>,
    pub nu: f64,
    pub eta: f64,
    #[serde(default = "default_burn")]
    pub burn: usize,
}

fn default_burn() -> usize {
    DEFAULT_BURN
}

impl DgpSpec {
    pub fn model(&self) -> Result<MarModel> {
        MarModel::new(self.phi.clone(), self.vphi.clone(), self.nu, self.eta)
    }
}

/// Where the robust method gets `k*` from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum KstarSource {
    /// Calibrate once per `T` at the true `nu`, with `n` replications.
    Calibrate { n: usize },
    /// Interpolate the embedded reference table at the true `nu`.
    Reference,
    /// Calibrate separately in every replication at the estimated `nu`.
    PerReplication { n: usize },
}

impl Default for KstarSource {
    fn default() -> Self {
        KstarSource::Calibrate { n: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErfConfig {
    pub dgp: DgpSpec,
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<usize>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_level")]
    pub nominal_level: f64,
    #[serde(default = "default_methods")]
    pub methods: Vec<SeMethod>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub kstar: KstarSource,
    #[serde(default)]
    pub fit: FitOptions,
}

fn default_t_grid() -> Vec<usize> {
    vec![100, 200, 500, 1000]
}
fn default_n() -> usize {
    1000
}
fn default_level() -> f64 {
    0.05
}
fn default_methods() -> Vec<SeMethod> {
    SeMethod::ALL.to_vec()
}

pub const MIN_ERF_REPLICATIONS: usize = 100;

impl ErfConfig {
    pub fn new(dgp: DgpSpec, seed: u64) -> Self {
        Self {
            dgp,
            t_grid: default_t_grid(),
            n: default_n(),
            nominal_level: default_level(),
            methods: default_methods(),
            seed,
            kstar: KstarSource::default(),
            fit: FitOptions::default(),
        }
    }

    fn validate(&self, min_n: usize) -> Result<MarModel> {
        if self.n < min_n {
            return Err(MarError::InvalidInput(format!("need at least {min_n} replications, got {}", self.n)));
        }
        if !(self.nominal_level > 0.0 && self.nominal_level <= 1.0) {
            return Err(MarError::InvalidInput(format!(
                "nominal level must lie in (0, 1], got {}",
                self.nominal_level
            )));
        }
        if self.t_grid.is_empty() {
            return Err(MarError::InvalidInput("empty sample-size grid".into()));
        }
        let model = self.dgp.model()?;
        if let Some(t) = self.t_grid.iter().find(|t| **t <= model.p() + 2) {
            return Err(MarError::InvalidInput(format!("T = {t} is too small for the model")));
        }
        Ok(model)
    }
}

/// Whether a method produced numbers in a cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "reason")]
pub enum CellStatus {
    Ok,
    /// The method does not exist for this DGP (e.g. classic with `nu <= 2`).
    NotDefined(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErfRow {
    pub t: usize,
    pub method: SeMethod,
    pub status: CellStatus,
    pub erf_phi: Vec<f64>,
    pub erf_vphi: Vec<f64>,
    /// Replications entering the rejection-frequency denominator.
    pub n_used: usize,
    /// Replications dropped because the fit failed or the standard errors
    /// were undefined.
    pub n_failed_fits: usize,
    /// `k*` used by the robust method (cell-level sources only).
    pub kstar: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErfTable {
    pub rows: Vec<ErfRow>,
}

impl ErfTable {
    pub fn row(&self, t: usize, method: SeMethod) -> Option<&ErfRow> {
        self.rows.iter().find(|r| r.t == t && r.method == method)
    }

    /// `T,method,erf_phi,erf_vphi,n_used,n_failed`; undefined cells print `/`,
    /// several coefficients are joined with `;`.
    pub fn write_delimited<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "T,method,erf_phi,erf_vphi,n_used,n_failed")?;
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(";");
        for row in &self.rows {
            let (phi, vphi) = match row.status {
                CellStatus::Ok => (join(&row.erf_phi), join(&row.erf_vphi)),
                CellStatus::NotDefined(_) => ("/".to_string(), "/".to_string()),
            };
            writeln!(w, "{},{},{},{},{},{}", row.t, row.method, phi, vphi, row.n_used, row.n_failed_fits)?;
        }
        Ok(())
    }
}

fn cell_seed(master: u64, t: usize) -> u64 {
    derive_seed(master, t as u64)
}

fn replication_seed(master: u64, t: usize, index: usize) -> u64 {
    derive_seed(cell_seed(master, t), index as u64 + 1)
}

/// `k*` for a cell at the true `nu`, or `None` when the source is per replication.
fn cell_kstar(source: KstarSource, nu: f64, t: usize, seed: u64) -> Result<Option<f64>> {
    match source {
        KstarSource::Calibrate { n } => Ok(Some(calibrate_kstar(nu, t, n, derive_seed(seed, 0x6b5f))?.kstar)),
        KstarSource::Reference => Ok(Some(kstar_reference(nu, t)?)),
        KstarSource::PerReplication { .. } => Ok(None),
    }
}

fn simulate_and_fit(model: &MarModel, dgp: &DgpSpec, t: usize, seed: u64, fit: &FitOptions) -> Result<(Vec<f64>, FitResult)> {
    let cfg = SimConfig { t, model: model.clone(), burn: dgp.burn, seed };
    let y = simulate_mar(&cfg)?;
    let opts = FitOptions { seed, ..fit.clone() };
    let fitted = fit_mar(&y, model.r(), model.s(), &opts)?;
    Ok((y, fitted))
}

fn replication_kstar(source: KstarSource, cell: Option<f64>, fit: &FitResult, seed: u64) -> Result<f64> {
    match (cell, source) {
        (Some(k), _) => Ok(k),
        (None, KstarSource::PerReplication { n }) => Ok(calibrate_kstar(fit.model.dist.nu, fit.t, n, derive_seed(seed, 0x6b5f))?.kstar),
        (None, _) => Err(MarError::InvalidInput("missing k*".into())),
    }
}

/// Per-coefficient rejections for `phi` and `varphi`.
type Decisions = (Vec<bool>, Vec<bool>);
type Rejections = Option<Decisions>;

/// Rejection frequencies of `H0: phi = phi0` and `H0: varphi = varphi0` at
/// the true orders, per sample size and method.
pub fn run_erf(cfg: &ErfConfig) -> Result<ErfTable> {
    let model = cfg.validate(MIN_ERF_REPLICATIONS)?;
    let critical = critical_value(cfg.nominal_level)?;
    let nu0 = cfg.dgp.nu;
    let mut rows = Vec::new();

    for &t in &cfg.t_grid {
        let mut undefined: BTreeMap<SeMethod, String> = BTreeMap::new();
        if nu0 <= 2.0 {
            undefined.insert(SeMethod::Classic, "nu<=2".into());
        }
        let wants_robust = cfg.methods.contains(&SeMethod::Robust);
        let kstar = if wants_robust && nu0 > 1.0 {
            cell_kstar(cfg.kstar, nu0, t, cell_seed(cfg.seed, t))?
        } else {
            if wants_robust {
                undefined.insert(SeMethod::Robust, "nu<=1".into());
            }
            None
        };
        let active: Vec<SeMethod> = cfg.methods.iter().copied().filter(|m| !undefined.contains_key(m)).collect();

        let reps = if active.is_empty() { 0 } else { cfg.n };
        let outcomes: Vec<Vec<Rejections>> = (0..reps)
            .into_par_iter()
            .map(|i| {
                let seed = replication_seed(cfg.seed, t, i);
                let Ok((y, fit)) = simulate_and_fit(&model, &cfg.dgp, t, seed, &cfg.fit) else {
                    return vec![None; active.len()];
                };
                active
                    .iter()
                    .map(|&method| {
                        let mut inputs = SeInputs::new(&y, &fit);
                        if method == SeMethod::Robust {
                            inputs.kstar = Some(replication_kstar(cfg.kstar, kstar, &fit, seed).ok()?);
                        }
                        let (se_phi, se_vphi) = coefficient_standard_errors(&inputs, method).ok()?;
                        let test = |est: &[f64], truth: &[f64], se: &[f64]| -> Option<Vec<bool>> {
                            est.iter()
                                .zip(truth)
                                .zip(se)
                                .map(|((e, t0), s)| t_test_with_critical(*e, *t0, *s, critical).ok().map(|t| t.reject))
                                .collect()
                        };
                        Some((
                            test(fit.model.phi.coeffs(), model.phi.coeffs(), &se_phi)?,
                            test(fit.model.vphi.coeffs(), model.vphi.coeffs(), &se_vphi)?,
                        ))
                    })
                    .collect()
            })
            .collect();

        for &method in &cfg.methods {
            if let Some(reason) = undefined.get(&method) {
                rows.push(ErfRow {
                    t,
                    method,
                    status: CellStatus::NotDefined(reason.clone()),
                    erf_phi: Vec::new(),
                    erf_vphi: Vec::new(),
                    n_used: 0,
                    n_failed_fits: 0,
                    kstar: None,
                });
                continue;
            }
            let col = active.iter().position(|m| *m == method).expect("active method");
            let used: Vec<&Decisions> = outcomes.iter().filter_map(|o| o[col].as_ref()).collect();
            let n_used = used.len();
            let freq = |pick: &dyn Fn(&Decisions) -> &Vec<bool>, len: usize| -> Vec<f64> {
                (0..len)
                    .map(|k| {
                        if n_used == 0 {
                            f64::NAN
                        } else {
                            used.iter().filter(|o| pick(o)[k]).count() as f64 / n_used as f64
                        }
                    })
                    .collect()
            };
            rows.push(ErfRow {
                t,
                method,
                status: CellStatus::Ok,
                erf_phi: freq(&|o| &o.0, model.r()),
                erf_vphi: freq(&|o| &o.1, model.s()),
                n_used,
                n_failed_fits: cfg.n - n_used,
                kstar: if method == SeMethod::Robust { kstar } else { None },
            });
        }
    }
    Ok(ErfTable { rows })
}

/// Five-number summary of the robust residual scale at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdGrowthRow {
    pub t: usize,
    pub kstar: Option<f64>,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub n_used: usize,
    pub n_failed: usize,
}

pub fn write_sd_growth<W: Write>(rows: &[SdGrowthRow], mut w: W) -> io::Result<()> {
    writeln!(w, "T,min,q1,median,q3,max,n_used,n_failed")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{},{},{}", r.t, r.min, r.q1, r.median, r.q3, r.max, r.n_used, r.n_failed)?;
    }
    Ok(())
}

fn five_numbers(t: usize, kstar: Option<f64>, mut values: Vec<f64>, n: usize) -> SdGrowthRow {
    values.sort_unstable_by(f64::total_cmp);
    let n_used = values.len();
    let q = |p: f64| if values.is_empty() { f64::NAN } else { quantile_sorted(&values, p) };
    SdGrowthRow {
        t,
        kstar,
        min: q(0.0),
        q1: q(0.25),
        median: q(0.5),
        q3: q(0.75),
        max: q(1.0),
        n_used,
        n_failed: n - n_used,
    }
}

/// Distribution of `k*(nu0, T) * MAD(residuals)` across replications, per `T`.
pub fn run_sd_growth(cfg: &ErfConfig) -> Result<Vec<SdGrowthRow>> {
    let model = cfg.validate(1)?;
    let nu0 = cfg.dgp.nu;
    if !(nu0 > 1.0) {
        return Err(MarError::Domain(format!("robust scale needs nu > 1, got {nu0}")));
    }
    cfg.t_grid
        .iter()
        .map(|&t| {
            let kstar = cell_kstar(cfg.kstar, nu0, t, cell_seed(cfg.seed, t))?;
            let sigmas: Vec<f64> = (0..cfg.n)
                .into_par_iter()
                .filter_map(|i| {
                    let seed = replication_seed(cfg.seed, t, i);
                    let (_, fit) = simulate_and_fit(&model, &cfg.dgp, t, seed, &cfg.fit).ok()?;
                    let k = replication_kstar(cfg.kstar, kstar, &fit, seed).ok()?;
                    robust_sigma(&fit.residuals, k).ok()
                })
                .collect();
            Ok(five_numbers(t, kstar, sigmas, cfg.n))
        })
        .collect()
}
