//! Covariate-adjusted nonparametric regression when both the response and
//! the predictor are observed only after multiplication by unknown smooth
//! functions of an observable confounder.

pub mod additive;
pub mod bandwidth;
pub mod cli;
pub mod distortion;
pub mod error;
pub mod estimator;
pub mod pipeline;
pub mod predictors;
pub mod quadrature;
pub mod simulate;
pub mod smoothing;

pub use error::{Error, Result};
