use serde::{Deserialize, Serialize};

use crate::error::{MarError, Result};
use crate::lagpoly::LagPolynomial;
use crate::tdist::TParams;

/// A MAR(r, s) model `phi(L) varphi(L^-1) y_t = eps_t` with t-distributed errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarModel {
    pub phi: LagPolynomial,
    pub vphi: LagPolynomial,
    pub dist: TParams,
}

impl MarModel {
    /// Builds a model, checking that both polynomials are stationary.
    pub fn new(phi: Vec<f64>, vphi: Vec<f64>, nu: f64, eta: f64) -> Result<Self> {
        let model = Self {
            phi: LagPolynomial::new(phi)?,
            vphi: LagPolynomial::new(vphi)?,
            dist: TParams::new(nu, eta)?,
        };
        model.check_stationary()?;
        Ok(model)
    }

    pub fn check_stationary(&self) -> Result<()> {
        for (name, poly) in [("causal", &self.phi), ("noncausal", &self.vphi)] {
            if !poly.is_stationary() {
                return Err(MarError::Domain(format!(
                    "{name} polynomial {:?} has a root on or inside the unit circle",
                    poly.coeffs()
                )));
            }
        }
        Ok(())
    }

    pub fn r(&self) -> usize {
        self.phi.degree()
    }

    pub fn s(&self) -> usize {
        self.vphi.degree()
    }

    /// Total order `p = r + s`.
    pub fn p(&self) -> usize {
        self.r() + self.s()
    }

    /// The time-reversed model, MAR(s, r) with the polynomials swapped.
    pub fn reversed(&self) -> Self {
        Self { phi: self.vphi.clone(), vphi: self.phi.clone(), dist: self.dist }
    }
}
