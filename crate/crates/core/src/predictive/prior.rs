use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// Conjugate Dirichlet prior ∝ p₀^{a₀−1} ∏ p_i^{a_i−1} per population. `a0[ν]` may
/// be negative; the posterior is proper iff r_ν + a0[ν] > 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletPriorSpec {
    pub a0: Vec<f64>,
    pub a: Vec<Vec<f64>>,
}

impl DirichletPriorSpec {
    /// a₀ = (1 − m_ν)/2 and a = ½ on every cell.
    pub fn jeffreys(spec: &ModelSpec) -> Self {
        Self {
            a0: spec.m.iter().map(|&m| (1.0 - m as f64) / 2.0).collect(),
            a: spec.m.iter().map(|&m| vec![0.5; m]).collect(),
        }
    }

    /// a_{·,ν}
    pub fn a_dot(&self, nu: usize) -> f64 {
        self.a[nu].iter().sum()
    }

    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        let n = spec.populations();
        if self.a0.len() != n || self.a.len() != n {
            return Err(Error::domain(format!("prior must cover {n} populations")));
        }
        for nu in 0..n {
            if self.a[nu].len() != spec.m[nu] {
                return Err(Error::domain(format!("a[{nu}] has {} entries, expected {}", self.a[nu].len(), spec.m[nu])));
            }
            if let Some(i) = self.a[nu].iter().position(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::domain(format!("a[{nu}][{i}] must be positive")));
            }
            if !self.a0[nu].is_finite() {
                return Err(Error::domain(format!("a0[{nu}] must be finite")));
            }
        }
        Ok(())
    }

    /// Validation plus posterior propriety r_ν + a_{0,ν} > 0.
    pub fn check_proper(&self, spec: &ModelSpec) -> Result<()> {
        self.validate(spec)?;
        for nu in 0..spec.populations() {
            if !(spec.r[nu] + self.a0[nu] > 0.0) {
                return Err(Error::Precondition(format!(
                    "r[{nu}] + a0[{nu}] = {} must be positive",
                    spec.r[nu] + self.a0[nu]
                )));
            }
        }
        Ok(())
    }
}

/// Hierarchical shrinkage prior: p₀,ν carries the extra exponent γ_ν u with
/// u ~ Gamma(α, β) weighting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrinkagePriorSpec {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: Vec<f64>,
    pub base: DirichletPriorSpec,
}

impl ShrinkagePriorSpec {
    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::domain("alpha must be positive"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::domain("beta must be positive"));
        }
        if self.gamma.len() != spec.populations() {
            return Err(Error::domain(format!("gamma must have {} entries", spec.populations())));
        }
        if let Some(nu) = self.gamma.iter().position(|&g| !(g > 0.0 && g.is_finite())) {
            return Err(Error::domain(format!("gamma[{nu}] must be positive")));
        }
        self.base.validate(spec)
    }

    pub fn check_proper(&self, spec: &ModelSpec) -> Result<()> {
        self.validate(spec)?;
        self.base.check_proper(spec)
    }
}
