use thiserror::Error;

/// Errors raised by the estimation and inference routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// The error variance is infinite (nu <= 2), so the classical information
    /// matrix does not exist.
    #[error("infinite error variance: nu = {nu} <= 2")]
    InfiniteVariance { nu: f64 },

    #[error("optimizer failed to find a finite likelihood (best point {best:?}, objective {value})")]
    NonConvergence { best: Vec<f64>, value: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("matrix is singular or not positive definite: {0}")]
    Singular(String),

    #[error("({nu}, {t}) lies outside the reference table")]
    OutOfRange { nu: f64, t: usize },
}

impl MarError {
    /// True for failures that come from the numerics rather than from the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            MarError::NonConvergence { .. }
                | MarError::Singular(_)
                | MarError::InfiniteVariance { .. }
                | MarError::Degenerate(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, MarError>;
