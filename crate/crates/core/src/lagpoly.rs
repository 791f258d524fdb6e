//! Lag and lead polynomials `1 - c_1 z - ... - c_d z^d`.
//!
//! The same coefficient vector serves as a causal polynomial in the lag
//! operator (`phi(L)`) or as a noncausal polynomial in the lead operator
//! (`varphi(L^-1)`); only the direction of the filter changes.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{MarError, Result};

/// Roots with modulus at or below `1 + STATIONARITY_MARGIN` count as nonstationary.
pub const STATIONARITY_MARGIN: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LagPolynomial {
    coeffs: Vec<f64>,
}

impl TryFrom<Vec<f64>> for LagPolynomial {
    type Error = MarError;

    fn try_from(coeffs: Vec<f64>) -> Result<Self> {
        LagPolynomial::new(coeffs)
    }
}

impl From<LagPolynomial> for Vec<f64> {
    fn from(p: LagPolynomial) -> Self {
        p.coeffs
    }
}

/// Truncated MA(inf) expansion of `1 / poly(z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaWeights {
    /// `psi_0 = 1, psi_1, ..., psi_M`.
    pub weights: Vec<f64>,
    /// Largest `|psi_j|` among the last `degree` retained weights.
    pub tail: f64,
    /// Set when `max_terms` was reached before the tail fell below `tol`.
    pub truncated: bool,
}

impl LagPolynomial {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if let Some(bad) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(MarError::InvalidInput(format!(
                "non-finite polynomial coefficient {bad}"
            )));
        }
        Ok(Self { coeffs })
    }

    /// The degree-0 polynomial `1`.
    pub fn identity() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Inverse roots of the polynomial, i.e. the eigenvalues of its companion
    /// matrix, as `(re, im)` pairs.
    pub fn companion_eigenvalues(&self) -> Vec<(f64, f64)> {
        companion_eigenvalues(&self.coeffs)
    }

    /// Smallest root modulus; `inf` for the identity polynomial.
    pub fn min_root_modulus(&self) -> f64 {
        min_root_modulus(&self.coeffs)
    }

    /// True iff every root lies outside the unit circle by more than
    /// [`STATIONARITY_MARGIN`].
    pub fn is_stationary(&self) -> bool {
        is_stationary_coeffs(&self.coeffs)
    }

    /// Coefficients of the MA(inf) representation `1 / poly(z) = sum psi_j z^j`.
    ///
    /// The expansion stops at the first index where the last `degree`
    /// weights all fall below `tol` in magnitude, or at `max_terms`.
    pub fn ma_weights(&self, tol: f64, max_terms: usize) -> Result<MaWeights> {
        if !(tol > 0.0) {
            return Err(MarError::InvalidInput(format!("tolerance must be positive, got {tol}")));
        }
        if !self.is_stationary() {
            return Err(MarError::Domain(format!(
                "MA expansion of a nonstationary polynomial {:?}",
                self.coeffs
            )));
        }
        let d = self.degree();
        if d == 0 {
            return Ok(MaWeights { weights: vec![1.0], tail: 0.0, truncated: false });
        }
        let mut psi = vec![1.0];
        loop {
            let j = psi.len();
            let next: f64 = self
                .coeffs
                .iter()
                .enumerate()
                .filter(|(i, _)| *i < j)
                .map(|(i, c)| c * psi[j - 1 - i])
                .sum();
            psi.push(next);
            let window = &psi[psi.len().saturating_sub(d)..];
            let tail = window.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if psi.len() > d && tail < tol {
                return Ok(MaWeights { weights: psi, tail, truncated: false });
            }
            if psi.len() > max_terms {
                return Ok(MaWeights { weights: psi, tail, truncated: true });
            }
        }
    }

    /// `z_t = y_t - sum_i c_i y_{t-i}` for `t = d+1 .. T`.
    pub fn filter_causal(&self, y: &[f64]) -> Result<Vec<f64>> {
        let d = self.degree();
        self.check_len(y)?;
        Ok((d..y.len())
            .map(|t| y[t] - self.coeffs.iter().enumerate().map(|(i, c)| c * y[t - 1 - i]).sum::<f64>())
            .collect())
    }

    /// `z_t = y_t - sum_i c_i y_{t+i}` for `t = 1 .. T-d`.
    pub fn filter_noncausal(&self, y: &[f64]) -> Result<Vec<f64>> {
        let d = self.degree();
        self.check_len(y)?;
        Ok((0..y.len() - d)
            .map(|t| y[t] - self.coeffs.iter().enumerate().map(|(i, c)| c * y[t + 1 + i]).sum::<f64>())
            .collect())
    }

    fn check_len(&self, y: &[f64]) -> Result<()> {
        if y.len() <= self.degree() {
            return Err(MarError::InvalidInput(format!(
                "series of length {} is too short for a degree-{} filter",
                y.len(),
                self.degree()
            )));
        }
        Ok(())
    }
}

pub(crate) fn is_stationary_coeffs(coeffs: &[f64]) -> bool {
    min_root_modulus(coeffs) > 1.0 + STATIONARITY_MARGIN
}

fn min_root_modulus(coeffs: &[f64]) -> f64 {
    let largest = companion_eigenvalues(coeffs)
        .into_iter()
        .map(|(re, im)| re.hypot(im))
        .fold(0.0_f64, f64::max);
    if largest.is_nan() {
        return f64::NAN;
    }
    1.0 / largest
}

fn companion_eigenvalues(coeffs: &[f64]) -> Vec<(f64, f64)> {
    match coeffs.len() {
        0 => Vec::new(),
        1 => vec![(coeffs[0], 0.0)],
        // lambda^2 - c1 lambda - c2 = 0
        2 => {
            let (c1, c2) = (coeffs[0], coeffs[1]);
            let disc = c1 * c1 + 4.0 * c2;
            if disc >= 0.0 {
                let s = disc.sqrt();
                vec![(0.5 * (c1 + s), 0.0), (0.5 * (c1 - s), 0.0)]
            } else {
                let im = 0.5 * (-disc).sqrt();
                vec![(0.5 * c1, im), (0.5 * c1, -im)]
            }
        }
        d => {
            let mut m = DMatrix::<f64>::zeros(d, d);
            for (j, c) in coeffs.iter().enumerate() {
                m[(0, j)] = *c;
            }
            for i in 1..d {
                m[(i, i - 1)] = 1.0;
            }
            m.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect()
        }
    }
}

/// Full MAR filter `phi(L) varphi(L^-1) y_t` for `t = r+1 .. T-s`, written into `out`.
pub(crate) fn mar_filter_into(y: &[f64], phi: &[f64], vphi: &[f64], out: &mut Vec<f64>) {
    let (r, s) = (phi.len(), vphi.len());
    out.clear();
    if y.len() <= r + s {
        return;
    }
    let u = |t: usize| y[t] - phi.iter().enumerate().map(|(i, c)| c * y[t - 1 - i]).sum::<f64>();
    match (r, s) {
        (1, 1) => {
            let (a, b) = (phi[0], vphi[0]);
            let mut cur = y[1] - a * y[0];
            for t in 1..y.len() - 1 {
                let next = y[t + 1] - a * y[t];
                out.push(cur - b * next);
                cur = next;
            }
        }
        _ => {
            for t in r..y.len() - s {
                let lead: f64 = vphi.iter().enumerate().map(|(i, c)| c * u(t + 1 + i)).sum();
                out.push(u(t) - lead);
            }
        }
    }
}
