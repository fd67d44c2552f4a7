//! Shrinkage estimation and Bayesian prediction for negative multinomial data.

pub mod dominance;
pub mod error;
pub mod estimators;
pub mod model;
pub mod nmpredict;
pub mod predictive;
pub mod quadrature;
pub mod riskharness;
pub mod rng;
pub mod scalar;
pub mod special;

pub use error::{Error, Result};
pub use model::{CountData, ModelSpec, ProbParam, TableCounts, TableModel};
pub use rng::RngSpec;
pub use scalar::{Field, Real};

/// Exact rational scalar used by the dominance checkers.
pub type Rational = num_rational::BigRational;
