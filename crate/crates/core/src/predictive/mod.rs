//! Bayesian predictive masses for the multinomial tables.

mod gibbs;
mod mass;
mod prior;

pub use gibbs::{batch_means, dirichlet_mc_mass, posterior_mc_mass, McEstimate};
pub use mass::{log_pred_mass_dirichlet, log_pred_mass_shrinkage, PredMass, ShrinkageMass};
pub use prior::{DirichletPriorSpec, ShrinkagePriorSpec};

use crate::model::ModelSpec;

/// Jeffreys prior: a₀ = (1 − m_ν)/2 and a = ½.
pub fn jeffreys_prior(spec: &ModelSpec) -> DirichletPriorSpec {
    DirichletPriorSpec::jeffreys(spec)
}
