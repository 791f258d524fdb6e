//! Mixed causal-noncausal autoregressions with Student's t errors:
//! simulation, approximate maximum likelihood, standard errors and the
//! Monte-Carlo experiments used to assess them.

// `!(x > 0.0)` is used deliberately so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimator;
pub mod harness;
pub mod infer;
pub mod lagpoly;
pub mod model;
pub mod optim;
pub mod rng;
pub mod robustscale;
pub mod simulator;
pub mod tdist;

pub use error::{MarError, Result};
pub use estimator::{estimate_pipeline, Centering, fit_mar, select_p, select_rs, FitOptions, FitResult, InfoCriterion};
pub use infer::{se_report, SeInputs, SeMethod, SeReport};
pub use lagpoly::LagPolynomial;
pub use model::MarModel;
pub use simulator::{simulate_mar, SimConfig};
pub use tdist::TParams;
