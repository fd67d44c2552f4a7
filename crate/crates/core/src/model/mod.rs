//! Negative multinomial observations and the multinomial table model.

mod hudson;
mod lattice;
mod negmn;
mod table;

pub use hudson::hudson_lhs_rhs;
pub use lattice::{compositions, Compositions, ProductLattice};
pub use negmn::{
    multinomial_sample, nb_log_pmf, nb_mean, nb_sample, nb_tail_bound, nb_tail_linear_bound, nb_truncation_radius, negmn_log_pmf,
    negmn_log_pmf_counts, negmn_sample, sample_counts, TruncatedLattice,
};
pub use table::{
    stats_log_pmf, table_log_pmf, table_log_total_mass, table_s, table_sample, TableCounts, TableModel,
    TableStats,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Problem dimensions: `m[ν]` cells and shape `r[ν]` for each population ν.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub m: Vec<usize>,
    pub r: Vec<f64>,
}

impl ModelSpec {
    pub fn new(m: Vec<usize>, r: Vec<f64>) -> Result<Self> {
        let spec = Self { m, r };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m.is_empty() {
            return Err(Error::domain("N must be at least 1"));
        }
        if self.m.len() != self.r.len() {
            return Err(Error::domain(format!(
                "m has {} populations but r has {}",
                self.m.len(),
                self.r.len()
            )));
        }
        if let Some(nu) = self.m.iter().position(|&m| m == 0) {
            return Err(Error::domain(format!("m[{nu}] must be at least 1")));
        }
        if let Some(nu) = self.r.iter().position(|&r| !(r.is_finite() && r > 0.0)) {
            return Err(Error::domain(format!("r[{nu}] = {} must be positive", self.r[nu])));
        }
        Ok(())
    }

    /// Number of populations N.
    pub fn populations(&self) -> usize {
        self.m.len()
    }
}

/// The unknown probabilities; `p[ν][i]` is p_{i+1,ν}. Each row lies in the open
/// sub-simplex, so p_{0,ν} = 1 − Σ_i p[ν][i] is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbParam<T = f64> {
    pub p: Vec<Vec<T>>,
}

impl<T: Real> ProbParam<T> {
    pub fn new(p: Vec<Vec<T>>) -> Result<Self> {
        let param = Self { p };
        param.validate()?;
        Ok(param)
    }

    pub fn validate(&self) -> Result<()> {
        for (nu, row) in self.p.iter().enumerate() {
            check_sub_simplex(row).map_err(|e| Error::domain(format!("population {nu}: {e}")))?;
        }
        Ok(())
    }

    pub fn check_against(&self, spec: &ModelSpec) -> Result<()> {
        if self.p.len() != spec.populations() {
            return Err(Error::domain(format!(
                "p has {} populations, model has {}",
                self.p.len(),
                spec.populations()
            )));
        }
        for (nu, (row, &m)) in self.p.iter().zip(&spec.m).enumerate() {
            if row.len() != m {
                return Err(Error::domain(format!("p[{nu}] has {} cells, expected {m}", row.len())));
            }
        }
        self.validate()
    }

    pub fn p_dot(&self, nu: usize) -> T {
        self.p[nu].iter().fold(T::zero(), |a, &b| a + b)
    }

    pub fn p0(&self, nu: usize) -> T {
        T::one() - self.p_dot(nu)
    }

    /// Probability of cell `i` of population ν, with `i = 0` the residual cell.
    pub fn cell(&self, nu: usize, i: usize) -> T {
        if i == 0 {
            self.p0(nu)
        } else {
            self.p[nu][i - 1]
        }
    }
}

pub(crate) fn check_sub_simplex<T: Real>(p: &[T]) -> std::result::Result<(), String> {
    let mut total = T::zero();
    for (i, &v) in p.iter().enumerate() {
        if !(v > T::zero()) || !num_traits::Float::is_finite(v) {
            return Err(format!("component {i} = {v:?} must be positive"));
        }
        total = total + v;
    }
    if !(total < T::one()) {
        return Err(format!("components sum to {total:?}, must be below 1"));
    }
    Ok(())
}

/// Observed counts; `x[ν][i]` is X_{i+1,ν}.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CountData {
    pub x: Vec<Vec<u64>>,
}

impl CountData {
    pub fn new(x: Vec<Vec<u64>>) -> Self {
        Self { x }
    }

    pub fn zeros(spec: &ModelSpec) -> Self {
        Self { x: spec.m.iter().map(|&m| vec![0; m]).collect() }
    }

    /// X_{·,ν}
    pub fn row_sum(&self, nu: usize) -> u64 {
        self.x[nu].iter().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.x.len()).map(|nu| self.row_sum(nu)).collect()
    }

    /// X_{·,·}
    pub fn total(&self) -> u64 {
        self.x.iter().flatten().sum()
    }

    pub fn check_against(&self, spec: &ModelSpec) -> Result<()> {
        if self.x.len() != spec.populations() {
            return Err(Error::domain(format!(
                "counts have {} populations, model has {}",
                self.x.len(),
                spec.populations()
            )));
        }
        for (nu, (row, &m)) in self.x.iter().zip(&spec.m).enumerate() {
            if row.len() != m {
                return Err(Error::domain(format!("x[{nu}] has {} cells, expected {m}", row.len())));
            }
        }
        Ok(())
    }

    /// Copy with X_{i,ν} incremented; `i` is 0-based over the m_ν cells.
    pub fn plus_unit(&self, i: usize, nu: usize) -> Self {
        let mut out = self.clone();
        out.x[nu][i] += 1;
        out
    }
}
