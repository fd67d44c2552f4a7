//! Predictive densities for future negative multinomial counts Y_ν ~ NM(s_ν, p_ν)
//! given current counts X, and the risk identities that express their KL risk
//! as an integral along a path of shapes.

mod identity;
mod risk;

use serde::{Deserialize, Serialize};

pub use identity::{
    kl_risk_diff_corollary3, kl_risk_rhs_theorem4, verify_corollary3, verify_theorem4, IdentityReport,
    RhsSettings,
};
pub use risk::{kl_loss_pointwise, kl_risk_lhs, kl_risk_lhs_with, log_plugin_ratio, LhsMethod, RiskValue};

use crate::error::{Error, Result};
use crate::model::{CountData, ModelSpec};
use crate::predictive::DirichletPriorSpec;
use crate::special::{ln_factorial, ln_gamma, log_sum_exp};

/// Shape path t_ν(τ) from r_ν at τ = 0 to r_ν + s_ν at τ = 1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathKind {
    #[default]
    Linear,
    /// t = r + s τ²
    Quadratic,
}

/// Future observations for the first `n = s.len()` populations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FutureSpec {
    pub s: Vec<f64>,
    #[serde(default)]
    pub path: PathKind,
}

impl FutureSpec {
    pub fn new(s: Vec<f64>) -> Self {
        Self { s, path: PathKind::Linear }
    }

    pub fn with_path(mut self, path: PathKind) -> Self {
        self.path = path;
        self
    }

    pub fn n(&self) -> usize {
        self.s.len()
    }

    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        if self.s.is_empty() || self.s.len() > spec.populations() {
            return Err(Error::domain(format!(
                "future covers {} populations, expected 1..={}",
                self.s.len(),
                spec.populations()
            )));
        }
        if let Some(nu) = self.s.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::domain(format!("s[{nu}] must be positive")));
        }
        Ok(())
    }

    /// t_ν(τ)
    pub fn shape(&self, spec: &ModelSpec, nu: usize, tau: f64) -> f64 {
        match self.s.get(nu) {
            None => spec.r[nu],
            Some(&s) => match self.path {
                PathKind::Linear => spec.r[nu] + s * tau,
                PathKind::Quadratic => spec.r[nu] + s * tau * tau,
            },
        }
    }

    /// t_ν′(τ)
    pub fn shape_rate(&self, nu: usize, tau: f64) -> f64 {
        match self.s.get(nu) {
            None => 0.0,
            Some(&s) => match self.path {
                PathKind::Linear => s,
                PathKind::Quadratic => 2.0 * s * tau,
            },
        }
    }
}

/// One atom of the mixing measure M.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub u: f64,
    pub mass: f64,
}

/// Prior ∫ ∏_ν p₀,ν^{γ̃_ν(u)+a₀,ν−1} ∏_i p_{i,ν}^{a_{i,ν}−1} dM(u) with M finite and
/// γ̃_ν(u) = γ_ν u.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralShrinkagePriorSpec {
    pub atoms: Vec<Atom>,
    pub gamma: Vec<f64>,
    pub base: DirichletPriorSpec,
}

impl GeneralShrinkagePriorSpec {
    /// Discretizes dM(u) = u^{α−1} e^{−βu} du with `n_atoms` midpoint atoms on a
    /// log-spaced grid covering all but a negligible part of the weight.
    pub fn from_gamma_weight(alpha: f64, beta: f64, gamma: Vec<f64>, base: DirichletPriorSpec, n_atoms: usize) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && n_atoms > 0) {
            return Err(Error::domain("alpha, beta and the atom count must be positive"));
        }
        let mode = ((alpha - 1.0).max(0.0) / beta).max(alpha / beta);
        let lo = (mode * 1e-8).ln().min(-30.0 / alpha);
        let hi = (mode + 60.0 / beta).ln();
        let h = (hi - lo) / n_atoms as f64;
        let atoms = (0..n_atoms)
            .map(|j| {
                let v = lo + (j as f64 + 0.5) * h;
                let u = v.exp();
                Atom { u, mass: (alpha * v - beta * u).exp() * h }
            })
            .filter(|a| a.mass > 0.0)
            .collect();
        Ok(Self { atoms, gamma, base })
    }

    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        self.base.validate(spec)?;
        if self.atoms.is_empty() {
            return Err(Error::domain("M needs at least one atom"));
        }
        for (j, a) in self.atoms.iter().enumerate() {
            if !(a.u > 0.0 && a.u.is_finite() && a.mass > 0.0 && a.mass.is_finite()) {
                return Err(Error::domain(format!("atom {j} needs positive finite u and mass")));
            }
        }
        if self.gamma.len() != spec.populations() {
            return Err(Error::domain("gamma must have one entry per population"));
        }
        if let Some(nu) = self.gamma.iter().position(|&g| !(g >= 0.0 && g.is_finite())) {
            return Err(Error::domain(format!("gamma[{nu}] must be nonnegative")));
        }
        Ok(())
    }
}

/// Either prior family, as accepted by the risk routines.
#[derive(Debug, Clone, Copy)]
pub enum NmPrior<'a> {
    Dirichlet(&'a DirichletPriorSpec),
    Shrinkage(&'a GeneralShrinkagePriorSpec),
}

impl<'a> From<&'a DirichletPriorSpec> for NmPrior<'a> {
    fn from(p: &'a DirichletPriorSpec) -> Self {
        NmPrior::Dirichlet(p)
    }
}

impl<'a> From<&'a GeneralShrinkagePriorSpec> for NmPrior<'a> {
    fn from(p: &'a GeneralShrinkagePriorSpec) -> Self {
        NmPrior::Shrinkage(p)
    }
}

/// Both priors as a finite mixture of Dirichlet kernels: atom j carries log weight
/// `log_w[j]` and residual exponent offset `b[j][ν]` (a₀ plus any shift).
#[derive(Debug, Clone)]
pub(crate) struct Mixture {
    pub log_w: Vec<f64>,
    pub b: Vec<Vec<f64>>,
    pub a: Vec<Vec<f64>>,
    pub a_dot: Vec<f64>,
}

impl Mixture {
    pub fn new(prior: NmPrior<'_>, spec: &ModelSpec) -> Result<Self> {
        let (log_w, b, base) = match prior {
            NmPrior::Dirichlet(d) => {
                d.validate(spec)?;
                (vec![0.0], vec![d.a0.clone()], d)
            }
            NmPrior::Shrinkage(g) => {
                g.validate(spec)?;
                let b = g
                    .atoms
                    .iter()
                    .map(|at| g.base.a0.iter().zip(&g.gamma).map(|(a0, gm)| a0 + gm * at.u).collect())
                    .collect();
                (g.atoms.iter().map(|at| at.mass.ln()).collect(), b, &g.base)
            }
        };
        for (j, row) in b.iter().enumerate() {
            for nu in 0..spec.populations() {
                if !(spec.r[nu] + row[nu] > 0.0) {
                    return Err(Error::Precondition(format!(
                        "atom {j}: r[{nu}] + shifted a0 = {} must be positive",
                        spec.r[nu] + row[nu]
                    )));
                }
            }
        }
        Ok(Self {
            log_w,
            b,
            a_dot: (0..spec.populations()).map(|nu| base.a_dot(nu)).collect(),
            a: base.a.clone(),
        })
    }

    pub fn atoms(&self) -> usize {
        self.log_w.len()
    }

    /// log w_j + Σ_ν [ln Γ(b_jν + t_ν) − ln Γ(b_jν + t_ν + X_·ν + a_·ν)] for each atom.
    fn atom_terms(&self, t: &[f64], totals: &[u64]) -> Vec<f64> {
        (0..self.atoms())
            .map(|j| {
                let mut v = self.log_w[j];
                for nu in 0..t.len() {
                    let c = self.b[j][nu] + t[nu];
                    v += ln_gamma(c) - ln_gamma(c + totals[nu] as f64 + self.a_dot[nu]);
                }
                v
            })
            .collect()
    }

    /// Normalized log posterior atom weights given residual shapes `t` and totals.
    pub fn posterior_log_weights(&self, t: &[f64], totals: &[u64]) -> Vec<f64> {
        if self.atoms() == 1 {
            return vec![0.0];
        }
        let raw = self.atom_terms(t, totals);
        let norm = log_sum_exp(&raw);
        raw.into_iter().map(|v| v - norm).collect()
    }

    /// log ∫ ∏_ν p₀^{t_ν} ∏ p^{x} dπ without the cell factors ∏ Γ(x + a), which the
    /// callers handle separately.
    fn log_residual_integral(&self, t: &[f64], totals: &[u64]) -> f64 {
        log_sum_exp(&self.atom_terms(t, totals))
    }

    /// log ĝ(y; x) − log of the combinatorial factor of y, i.e. the log posterior
    /// mean of ∏_{ν<n} p₀^{s} ∏ p^{y}.
    pub fn log_ratio(&self, y: &[Vec<u64>], x: &CountData, spec: &ModelSpec, fut: &FutureSpec) -> f64 {
        let n_pop = spec.populations();
        let mut cells = 0.0;
        let mut t_num = spec.r.clone();
        let mut tot_num = x.row_sums();
        let tot_den = tot_num.clone();
        for nu in 0..fut.n() {
            t_num[nu] += fut.s[nu];
            for (i, (&yi, &xi)) in y[nu].iter().zip(&x.x[nu]).enumerate() {
                if yi > 0 {
                    let base = xi as f64 + self.a[nu][i];
                    cells += ln_gamma(base + yi as f64) - ln_gamma(base);
                }
            }
            tot_num[nu] += y[nu].iter().sum::<u64>();
        }
        debug_assert_eq!(t_num.len(), n_pop);
        cells + self.log_residual_integral(&t_num, &tot_num) - self.log_residual_integral(&spec.r, &tot_den)
    }
}

/// log Γ(s+y_·)/(Γ(s) ∏ y_i!) summed over the future populations.
pub(crate) fn log_future_comb(y: &[Vec<u64>], fut: &FutureSpec) -> f64 {
    let mut out = 0.0;
    for (nu, row) in y.iter().enumerate().take(fut.n()) {
        let tot: u64 = row.iter().sum();
        out += ln_gamma(fut.s[nu] + tot as f64) - ln_gamma(fut.s[nu]);
        out -= row.iter().map(|&v| ln_factorial(v)).sum::<f64>();
    }
    out
}

/// Checks x and y and returns the first n rows of y. Rows of y past n must be zero.
fn check_pair<'y>(
    y: &'y CountData,
    x: &CountData,
    spec: &ModelSpec,
    fut: &FutureSpec,
) -> Result<&'y [Vec<u64>]> {
    spec.validate()?;
    fut.validate(spec)?;
    x.check_against(spec)?;
    let n = fut.n();
    if y.x.len() != n && y.x.len() != spec.populations() {
        return Err(Error::domain(format!("y must have {n} or {} rows", spec.populations())));
    }
    for nu in 0..y.x.len() {
        if y.x[nu].len() != spec.m[nu] {
            return Err(Error::domain(format!("y row {nu} has {} cells, expected {}", y.x[nu].len(), spec.m[nu])));
        }
        if nu >= n && y.x[nu].iter().any(|&v| v != 0) {
            return Err(Error::Contract(format!("population {nu} has no future data but y is nonzero")));
        }
    }
    Ok(&y.x[..n])
}

/// log ĝ(y; x) under a Dirichlet prior.
pub fn log_pred_mass_negmn_dirichlet(
    y: &CountData,
    x: &CountData,
    spec: &ModelSpec,
    fut: &FutureSpec,
    prior: &DirichletPriorSpec,
) -> Result<f64> {
    log_pred_mass_negmn(y, x, spec, fut, prior.into())
}

/// log ĝ(y; x) under a finite-mixture shrinkage prior.
pub fn log_pred_mass_negmn_shrinkage(
    y: &CountData,
    x: &CountData,
    spec: &ModelSpec,
    fut: &FutureSpec,
    prior: &GeneralShrinkagePriorSpec,
) -> Result<f64> {
    log_pred_mass_negmn(y, x, spec, fut, prior.into())
}

pub fn log_pred_mass_negmn(
    y: &CountData,
    x: &CountData,
    spec: &ModelSpec,
    fut: &FutureSpec,
    prior: NmPrior<'_>,
) -> Result<f64> {
    let y = check_pair(y, x, spec, fut)?;
    let mix = Mixture::new(prior, spec)?;
    Ok(log_future_comb(y, fut) + mix.log_ratio(y, x, spec, fut))
}
