//! Robust residual scale `k * MAD` and Monte-Carlo calibration of `k`.
//!
//! For a sample of length `T` the statistic `k = sd / MAD` is a random
//! variable whose distribution depends on the error law. `k*` is the mode of
//! its density, estimated from `N` simulated samples after discarding values
//! outside `[Q1 - 3 IQR, Q3 + 3 IQR]`.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MarError, Result};
use crate::rng::replication_rng;
use crate::tdist::{TParams, TSampler};

/// Median; the midpoint of the two central order statistics for even lengths.
pub fn median(x: &[f64]) -> Result<f64> {
    let mut v = x.to_vec();
    median_in_place(&mut v)
}

fn median_in_place(v: &mut [f64]) -> Result<f64> {
    let n = v.len();
    if n == 0 {
        return Err(MarError::InvalidInput("median of an empty sample".into()));
    }
    let mid = n / 2;
    let (lower, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *m;
    if n % 2 == 1 {
        return Ok(upper);
    }
    let below = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(0.5 * (below + upper))
}

/// Median absolute deviation `median(|x_i - median(x)|)` (unscaled).
pub fn mad(x: &[f64]) -> Result<f64> {
    let mut v = x.to_vec();
    mad_in_place(&mut v)
}

fn mad_in_place(v: &mut [f64]) -> Result<f64> {
    let m = median_in_place(v)?;
    v.iter_mut().for_each(|x| *x = (*x - m).abs());
    median_in_place(v)
}

fn sample_sd(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// `sd / MAD` with the `n - 1` standard deviation.
pub fn k_statistic(x: &[f64]) -> Result<f64> {
    let mut buf = x.to_vec();
    k_statistic_with(x, &mut buf)
}

fn k_statistic_with(x: &[f64], buf: &mut Vec<f64>) -> Result<f64> {
    if x.len() < 2 {
        return Err(MarError::InvalidInput("k statistic needs at least two observations".into()));
    }
    buf.clear();
    buf.extend_from_slice(x);
    let m = mad_in_place(buf)?;
    if !(m > 0.0) {
        return Err(MarError::Degenerate("median absolute deviation is zero".into()));
    }
    Ok(sample_sd(x) / m)
}

/// Quantile by linear interpolation between order statistics of a sorted
/// sample (`h = (n - 1) q`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trimmed {
    pub q1: f64,
    pub q3: f64,
    pub lo: f64,
    pub hi: f64,
    /// Retained values, sorted ascending.
    pub retained: Vec<f64>,
}

impl Trimmed {
    pub fn dropped(&self, original_len: usize) -> usize {
        original_len - self.retained.len()
    }
}

/// Keeps the values inside `[Q1 - 3 IQR, Q3 + 3 IQR]`.
pub fn trim_interval(ks: &[f64]) -> Result<Trimmed> {
    if ks.is_empty() {
        return Err(MarError::InvalidInput("cannot trim an empty sample".into()));
    }
    let mut sorted = ks.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok(trim_sorted(sorted))
}

fn trim_sorted(sorted: Vec<f64>) -> Trimmed {
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 3.0 * iqr, q3 + 3.0 * iqr);
    let start = sorted.partition_point(|v| *v < lo);
    let end = sorted.partition_point(|v| *v <= hi);
    let retained = sorted[start..end].to_vec();
    Trimmed { q1, q3, lo, hi, retained }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bandwidth {
    /// `0.9 min(sd, IQR / 1.34) n^(-1/5)`.
    Silverman,
    Fixed(f64),
}

pub const KDE_GRID_POINTS: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct KdeMode {
    pub mode: f64,
    pub bandwidth: f64,
    /// `(x, density)` on the evaluation grid, sorted by `x`.
    pub grid: Vec<(f64, f64)>,
}

pub fn silverman_bandwidth(xs: &[f64]) -> Result<f64> {
    if xs.len() < 2 {
        return Err(MarError::InvalidInput("bandwidth needs at least two points".into()));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let sd = sample_sd(xs);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    if !(spread > 0.0) {
        return Err(MarError::Degenerate("sample has zero variance".into()));
    }
    Ok(0.9 * spread * (xs.len() as f64).powf(-0.2))
}

/// Mode of a Gaussian kernel density estimate on a 512-point grid spanning
/// `[min - 3h, max + 3h]`.
pub fn kde_mode(xs: &[f64], bandwidth: Bandwidth) -> Result<KdeMode> {
    kde_mode_on_grid(xs, bandwidth, KDE_GRID_POINTS)
}

pub fn kde_mode_on_grid(xs: &[f64], bandwidth: Bandwidth, points: usize) -> Result<KdeMode> {
    if xs.len() < 2 {
        return Err(MarError::InvalidInput("density estimation needs at least two points".into()));
    }
    if points < 2 {
        return Err(MarError::InvalidInput("grid needs at least two points".into()));
    }
    let h = match bandwidth {
        Bandwidth::Silverman => silverman_bandwidth(xs)?,
        Bandwidth::Fixed(h) if h > 0.0 && h.is_finite() => h,
        Bandwidth::Fixed(h) => return Err(MarError::InvalidInput(format!("bandwidth must be positive, got {h}"))),
    };
    let mut sorted = xs.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let (a, b) = (min - 3.0 * h, max + 3.0 * h);
    let step = (b - a) / (points - 1) as f64;
    let norm = 1.0 / (sorted.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    // Kernel contributions beyond 8 bandwidths are below 1e-14 and skipped.
    let reach = 8.0 * h;

    let grid: Vec<(f64, f64)> = (0..points)
        .map(|i| {
            let x = a + i as f64 * step;
            let lo = sorted.partition_point(|v| *v < x - reach);
            let hi = sorted.partition_point(|v| *v <= x + reach);
            let dens: f64 = sorted[lo..hi]
                .iter()
                .map(|v| {
                    let z = (x - v) / h;
                    (-0.5 * z * z).exp()
                })
                .sum();
            (x, dens * norm)
        })
        .collect();
    let mode = grid
        .iter()
        .fold((f64::NAN, f64::NEG_INFINITY), |best, &(x, d)| if d > best.1 { (x, d) } else { best })
        .0;
    Ok(KdeMode { mode, bandwidth: h, grid })
}

/// Error law used in the calibration experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CalibrationLaw {
    StudentT { nu: f64 },
    Gaussian,
}

impl CalibrationLaw {
    /// Degrees of freedom, `inf` for the Gaussian law.
    pub fn nu(&self) -> f64 {
        match self {
            CalibrationLaw::StudentT { nu } => *nu,
            CalibrationLaw::Gaussian => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KCalibration {
    pub law: CalibrationLaw,
    pub t: usize,
    pub n: usize,
    pub bandwidth: f64,
    pub kstar: f64,
    pub grid: Vec<(f64, f64)>,
    pub trimmed_fraction: f64,
    pub seed: u64,
}

impl KCalibration {
    pub fn nu(&self) -> f64 {
        self.law.nu()
    }

    /// Writes the summary line and the density grid as CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "nu,T,N,bandwidth,kstar,trimmed_fraction")?;
        writeln!(
            w,
            "{},{},{},{},{},{}",
            self.nu(),
            self.t,
            self.n,
            self.bandwidth,
            self.kstar,
            self.trimmed_fraction
        )?;
        writeln!(w, "x,density")?;
        for (x, d) in &self.grid {
            writeln!(w, "{x},{d}")?;
        }
        Ok(())
    }
}

pub const MIN_CALIBRATION_T: usize = 10;
pub const MIN_CALIBRATION_N: usize = 1000;

/// `k*` for Student's t errors; `nu` must exceed 1.
pub fn calibrate_kstar(nu: f64, t: usize, n: usize, seed: u64) -> Result<KCalibration> {
    if !(nu > 1.0) || !nu.is_finite() {
        return Err(MarError::Domain(format!(
            "k* calibration is defined for nu in (1, inf); got nu = {nu}"
        )));
    }
    calibrate_kstar_with(CalibrationLaw::StudentT { nu }, t, n, seed)
}

/// Runs the calibration experiment: `n` samples of length `t`, one `k` per
/// sample, trim, then take the density mode. Replication `i` always uses
/// random stream `i`, so the result does not depend on the thread count.
pub fn calibrate_kstar_with(law: CalibrationLaw, t: usize, n: usize, seed: u64) -> Result<KCalibration> {
    if t < MIN_CALIBRATION_T {
        return Err(MarError::InvalidInput(format!("calibration needs T >= {MIN_CALIBRATION_T}, got {t}")));
    }
    if n < MIN_CALIBRATION_N {
        return Err(MarError::InvalidInput(format!("calibration needs N >= {MIN_CALIBRATION_N}, got {n}")));
    }
    let sampler = match law {
        CalibrationLaw::StudentT { nu } => Some(TSampler::new(&TParams::new(nu, 1.0)?)?),
        CalibrationLaw::Gaussian => None,
    };

    let ks: Vec<f64> = (0..n)
        .into_par_iter()
        .map_init(
            || (vec![0.0; t], Vec::with_capacity(t)),
            |(sample, buf), i| {
                let mut rng = replication_rng(seed, i as u64);
                match &sampler {
                    Some(s) => sample.iter_mut().for_each(|x| *x = rng.sample(s)),
                    None => sample.iter_mut().for_each(|x| *x = rng.sample(StandardNormal)),
                }
                // A zero MAD needs ties at the median, which has probability zero.
                k_statistic_with(sample, buf).unwrap_or(f64::NAN)
            },
        )
        .collect();

    let mut finite: Vec<f64> = ks.into_iter().filter(|k| k.is_finite()).collect();
    if finite.len() < 2 {
        return Err(MarError::Degenerate("no finite k statistics".into()));
    }
    finite.sort_unstable_by(f64::total_cmp);
    let trimmed = trim_sorted(finite);
    let kde = kde_mode(&trimmed.retained, Bandwidth::Silverman)?;
    Ok(KCalibration {
        law,
        t,
        n,
        bandwidth: kde.bandwidth,
        kstar: kde.mode,
        grid: kde.grid,
        trimmed_fraction: 1.0 - trimmed.retained.len() as f64 / n as f64,
        seed,
    })
}

/// Degrees of freedom of the reference `k*` table.
pub const REFERENCE_NU: [f64; 6] = [1.2, 1.4, 1.5, 1.6, 1.8, 3.0];
/// Sample sizes of the reference `k*` table.
pub const REFERENCE_T: [usize; 6] = [100, 200, 500, 1000, 2000, 3000];
/// `REFERENCE_KSTAR[i][j]` is `k*` at `REFERENCE_T[i]`, `REFERENCE_NU[j]`.
pub const REFERENCE_KSTAR: [[f64; 6]; 6] = [
    [4.186322, 3.317155, 3.049654, 2.866044, 2.57295, 1.937395],
    [5.311298, 3.901011, 3.557615, 3.2330488, 2.85024, 2.02271],
    [7.266156, 4.941986, 4.297126, 3.849296, 3.233094, 2.082257],
    [9.022733, 5.839081, 4.971029, 4.330869, 3.491673, 2.116381],
    [11.41613, 6.827137, 5.597711, 4.750695, 3.761855, 2.158208],
    [13.20991, 7.448153, 6.022052, 5.128269, 3.902047, 2.166739],
];

/// `k*` from the embedded table: exact entries, otherwise bilinear
/// interpolation in `(nu, ln T)` inside the table's hull.
pub fn kstar_reference(nu: f64, t: usize) -> Result<f64> {
    let (nu_lo, nu_hi) = (REFERENCE_NU[0], REFERENCE_NU[5]);
    let (t_lo, t_hi) = (REFERENCE_T[0], REFERENCE_T[5]);
    if !(nu >= nu_lo && nu <= nu_hi) || t < t_lo || t > t_hi {
        return Err(MarError::OutOfRange { nu, t });
    }
    let bracket = |grid: &[f64], v: f64| -> (usize, f64) {
        let i = grid.iter().rposition(|g| *g <= v).unwrap_or(0).min(grid.len() - 2);
        let w = (v - grid[i]) / (grid[i + 1] - grid[i]);
        (i, w.clamp(0.0, 1.0))
    };
    let log_t: Vec<f64> = REFERENCE_T.iter().map(|t| (*t as f64).ln()).collect();
    let (j, wn) = bracket(&REFERENCE_NU, nu);
    let (i, wt) = bracket(&log_t, (t as f64).ln());
    let at = |i: usize, j: usize| REFERENCE_KSTAR[i][j];
    // Exact grid hits return the stored value untouched.
    if wn == 0.0 && wt == 0.0 {
        return Ok(at(i, j));
    }
    let low = at(i, j) * (1.0 - wn) + at(i, j + 1) * wn;
    let high = at(i + 1, j) * (1.0 - wn) + at(i + 1, j + 1) * wn;
    Ok(low * (1.0 - wt) + high * wt)
}
