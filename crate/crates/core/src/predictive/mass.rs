use std::collections::HashMap;
use std::sync::Mutex;

use super::{DirichletPriorSpec, ShrinkagePriorSpec};
use crate::error::{Error, Result};
use crate::model::{CountData, ModelSpec, TableCounts, TableModel, TableStats};
use crate::quadrature::{integrate_log_half_line, QuadratureSpec};
use crate::special::ln_gamma;

fn check_inputs(x: &CountData, spec: &ModelSpec, tm: &TableModel, prior: &DirichletPriorSpec) -> Result<()> {
    spec.validate()?;
    x.check_against(spec)?;
    tm.check_populations(spec.populations())?;
    prior.check_proper(spec)
}

/// Σ_ν Σ_i [lnΓ(s_{i,ν} + X_{i,ν} + a_{i,ν}) − lnΓ(X_{i,ν} + a_{i,ν})] + log C(w):
/// the part of either predictive mass that does not involve the residual cells.
fn cell_terms(stats: &TableStats, x: &CountData, prior: &DirichletPriorSpec) -> f64 {
    let mut out = stats.log_c;
    for (nu, row) in x.x.iter().enumerate() {
        for (i, &xi) in row.iter().enumerate() {
            let s = stats.s[nu][i + 1];
            if s > 0 {
                let base = xi as f64 + prior.a[nu][i];
                out += ln_gamma(base + s as f64) - ln_gamma(base);
            }
        }
    }
    out
}

/// log of the Bayesian predictive mass of `w` under the Dirichlet prior.
pub fn log_pred_mass_dirichlet(
    w: &TableCounts,
    x: &CountData,
    spec: &ModelSpec,
    tm: &TableModel,
    prior: &DirichletPriorSpec,
) -> Result<f64> {
    check_inputs(x, spec, tm, prior)?;
    let stats = TableStats::compute(w, tm, &spec.m)?;
    let mut out = cell_terms(&stats, x, prior);
    for nu in 0..spec.populations() {
        let base = spec.r[nu] + prior.a0[nu];
        let full = base + x.row_sum(nu) as f64 + prior.a_dot(nu);
        let trials = tm.trials_touching(nu) as f64;
        out += ln_gamma(base + stats.s0(nu) as f64) - ln_gamma(base);
        out -= ln_gamma(full + trials) - ln_gamma(full);
    }
    Ok(out)
}

/// A predictive log mass with the relative error of its quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredMass {
    pub log_mass: f64,
    pub rel_err: f64,
}

/// Evaluates predictive masses under the hierarchical shrinkage prior.
///
/// Both u-integrals depend on (w, X) only through s_{0,ν}(w) and X_{·,ν}, so they
/// are cached under that key. The cache is shared across threads; entries are pure
/// functions of their key, so results do not depend on evaluation order.
pub struct ShrinkageMass {
    spec: ModelSpec,
    tm: TableModel,
    prior: ShrinkagePriorSpec,
    quad: QuadratureSpec,
    trials: Vec<u64>,
    cache: Mutex<HashMap<Vec<u64>, (f64, f64)>>,
}

impl ShrinkageMass {
    pub fn new(spec: &ModelSpec, tm: &TableModel, prior: &ShrinkagePriorSpec, quad: QuadratureSpec) -> Result<Self> {
        spec.validate()?;
        tm.check_populations(spec.populations())?;
        prior.check_proper(spec)?;
        quad.validate()?;
        Ok(Self {
            spec: spec.clone(),
            tm: tm.clone(),
            prior: prior.clone(),
            quad,
            trials: (0..spec.populations()).map(|nu| tm.trials_touching(nu)).collect(),
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn table_model(&self) -> &TableModel {
        &self.tm
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }

    /// log ∫ u^{α−1} e^{−βu} ∏_ν Γ(γ_ν u + r_ν + a_{0,ν} + s_ν)/Γ(γ_ν u + r_ν + a_{0,ν} + t_ν + X_{·,ν} + a_{·,ν}) du
    /// with (s_ν, t_ν) = (s_{0,ν}(w), Σ_{λ∈Λ(ν)} l^(λ)) in the numerator and (0, 0)
    /// in the denominator.
    fn log_integral(&self, s0: &[u64], with_trials: bool, row_sums: &[u64]) -> Result<(f64, f64)> {
        let mut key = Vec::with_capacity(2 * s0.len() + 1);
        key.push(with_trials as u64);
        key.extend_from_slice(s0);
        key.extend_from_slice(row_sums);
        if let Some(&hit) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(hit);
        }
        let p = &self.prior;
        let n = self.spec.populations();
        let base: Vec<f64> = (0..n).map(|nu| self.spec.r[nu] + p.base.a0[nu]).collect();
        let top: Vec<f64> = (0..n)
            .map(|nu| {
                let t = if with_trials { self.trials[nu] as f64 } else { 0.0 };
                base[nu] + t + row_sums[nu] as f64 + p.base.a_dot(nu)
            })
            .collect();
        let log_f = |u: f64| {
            let mut v = (p.alpha - 1.0) * u.ln() - p.beta * u;
            for nu in 0..n {
                let g = p.gamma[nu] * u;
                v += ln_gamma(g + base[nu] + s0[nu] as f64) - ln_gamma(g + top[nu]);
            }
            v
        };
        let res = integrate_log_half_line(log_f, &self.quad)?;
        let out = (res.log_value, res.rel_err);
        self.cache.lock().expect("cache lock").insert(key, out);
        Ok(out)
    }

    /// log of the Bayesian predictive mass of `w` given `x`.
    pub fn log_mass(&self, w: &TableCounts, x: &CountData) -> Result<PredMass> {
        x.check_against(&self.spec)?;
        let stats = TableStats::compute(w, &self.tm, &self.spec.m)?;
        let s0: Vec<u64> = (0..self.spec.populations()).map(|nu| stats.s0(nu)).collect();
        let row_sums = x.row_sums();
        let zeros = vec![0; s0.len()];
        let (num, e1) = self.log_integral(&s0, true, &row_sums)?;
        let (den, e2) = self.log_integral(&zeros, false, &row_sums)?;
        Ok(PredMass { log_mass: cell_terms(&stats, x, &self.prior.base) + num - den, rel_err: e1 + e2 })
    }
}

/// log of the Bayesian predictive mass of `w` under the hierarchical shrinkage prior.
pub fn log_pred_mass_shrinkage(
    w: &TableCounts,
    x: &CountData,
    spec: &ModelSpec,
    tm: &TableModel,
    prior: &ShrinkagePriorSpec,
    quad: &QuadratureSpec,
) -> Result<f64> {
    check_inputs(x, spec, tm, &prior.base)?;
    Ok(ShrinkageMass::new(spec, tm, prior, *quad)?.log_mass(w, x)?.log_mass)
}

pub(crate) fn require_finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Sampler(format!("{what} is not finite")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::log_sum_exp;

    fn sec42(r: [f64; 2]) -> (ModelSpec, TableModel, ShrinkagePriorSpec) {
        let spec = ModelSpec::new(vec![3, 3], r.to_vec()).unwrap();
        let tm = TableModel::new(vec![vec![0], vec![0, 1]], vec![1, 1]).unwrap();
        let prior = ShrinkagePriorSpec {
            alpha: 1.0,
            beta: 1.0,
            gamma: vec![1.0, 1.0],
            base: DirichletPriorSpec::jeffreys(&spec),
        };
        (spec, tm, prior)
    }

    #[test]
    fn single_cell_beta_form() {
        // One trial on a two-cell population: mass of the non-residual cell is the
        // posterior mean (X + a)/(r + a₀ + X + a).
        let spec = ModelSpec::new(vec![1], vec![2.0]).unwrap();
        let tm = TableModel::new(vec![vec![0]], vec![1]).unwrap();
        let prior = DirichletPriorSpec { a0: vec![0.5], a: vec![vec![1.5]] };
        let x = CountData::new(vec![vec![3]]);
        let w = TableCounts { w: vec![vec![0, 1]] };
        let lm = log_pred_mass_dirichlet(&w, &x, &spec, &tm, &prior).unwrap();
        assert!((lm.exp() - 4.5 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn masses_normalize() {
        let (spec, tm, prior) = sec42([5.0, 5.0]);
        let x = CountData::new(vec![vec![2, 0, 5], vec![1, 1, 0]]);
        let support = tm.support(&spec.m);
        let d: Vec<f64> =
            support.iter().map(|w| log_pred_mass_dirichlet(w, &x, &spec, &tm, &prior.base).unwrap()).collect();
        assert!(log_sum_exp(&d).abs() < 1e-12);
        let sm = ShrinkageMass::new(&spec, &tm, &prior, QuadratureSpec::default()).unwrap();
        let s: Vec<f64> = support.iter().map(|w| sm.log_mass(w, &x).unwrap().log_mass).collect();
        assert!(log_sum_exp(&s).abs() < 1e-8);
        // s₀ takes values 0..=2 for the first population and 0..=1 for the second.
        assert!(sm.cache_len() <= 7);
    }

    #[test]
    fn small_gamma_recovers_dirichlet() {
        let (spec, tm, mut prior) = sec42([4.0, 6.0]);
        prior.gamma = vec![1e-8, 1e-8];
        let x = CountData::new(vec![vec![0, 3, 1], vec![2, 0, 0]]);
        for w in tm.support(&spec.m).iter().step_by(7) {
            let a = log_pred_mass_dirichlet(w, &x, &spec, &tm, &prior.base).unwrap();
            let b = log_pred_mass_shrinkage(w, &x, &spec, &tm, &prior, &QuadratureSpec::default()).unwrap();
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn improper_posterior_rejected() {
        let (mut spec, tm, prior) = sec42([5.0, 5.0]);
        spec.r = vec![1.0, 5.0];
        let x = CountData::new(vec![vec![0; 3], vec![0; 3]]);
        let w = &tm.support(&spec.m)[0];
        assert!(matches!(
            log_pred_mass_dirichlet(w, &x, &spec, &tm, &prior.base),
            Err(Error::Precondition(_))
        ));
    }
}
