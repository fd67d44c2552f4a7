//! The path-integral form of the KL risk and of the risk difference between a
//! mixture prior and a Dirichlet prior.
//!
//! For fixed τ the inner sum over k and w is split into three series. With
//! θ_w = ∏ p^w and d_w its posterior mean given Z = z,
//!
//! * Σ_k (1/k) Σ_w mult·(d_w − θ_w) = E[−ln p₀ | z] + ln p₀ (closed form);
//! * Σ_k (1/k) Σ_w mult·θ_w ln θ_w = Σ_i p_i ln p_i / p₀ (closed form);
//! * −Σ_k (1/k) Σ_w mult·θ_w ln d_w, summed to k_max. Since −ln d_w ≤ k·max_i E[−ln p_i | z]
//!   by Jensen, the k-th term is at most p_·^k·max_i E[−ln p_i | z], which gives a
//!   geometric tail bound.
//!
//! The third series collapses to binomial expectations because ln d_w is a sum
//! of a per-cell part and a part depending on k only.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::risk::{kl_risk_lhs, LhsMethod, RiskValue};
use super::{FutureSpec, GeneralShrinkagePriorSpec, Mixture, NmPrior};
use crate::error::{Error, Result};
use crate::model::{
    compositions, nb_log_pmf, nb_mean, nb_tail_bound, nb_tail_linear_bound, nb_truncation_radius, negmn_log_pmf,
    ModelSpec, ProbParam, ProductLattice,
};
use crate::predictive::DirichletPriorSpec;
use crate::quadrature::gauss_legendre;
use crate::special::{digamma, ln_factorial, log_sum_exp, pairwise_sum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhsSettings {
    pub k_max: usize,
    /// Gauss–Legendre nodes in τ; the error estimate compares with half as many.
    pub tau_nodes: usize,
    pub trunc: f64,
    pub budget: usize,
}

impl Default for RhsSettings {
    fn default() -> Self {
        Self { k_max: 80, tau_nodes: 64, trunc: 1e-10, budget: 1 << 24 }
    }
}

impl RhsSettings {
    pub fn validate(&self) -> Result<()> {
        if self.k_max == 0 || self.tau_nodes < 2 {
            return Err(Error::domain("k_max must be positive and tau_nodes at least 2"));
        }
        if !(self.trunc > 0.0 && self.trunc < 1.0) {
            return Err(Error::domain(format!("truncation level {} must lie in (0, 1)", self.trunc)));
        }
        Ok(())
    }
}

/// Both sides of a risk identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub lhs: f64,
    pub lhs_error: f64,
    pub rhs: f64,
    pub rhs_error: f64,
    pub residual: f64,
    pub certified_bound: f64,
    pub holds: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl IdentityReport {
    fn new(lhs: RiskValue, rhs: RiskValue) -> Self {
        let residual = (lhs.value - rhs.value).abs();
        let certified_bound = lhs.error + rhs.error;
        Self {
            lhs: lhs.value,
            lhs_error: lhs.error,
            rhs: rhs.value,
            rhs_error: rhs.error,
            residual,
            certified_bound,
            holds: residual <= certified_bound,
            config: None,
        }
    }
}

/// Posterior summaries of one population under one prior, given Z.
struct AtomState {
    /// normalized posterior atom weights
    weight: Vec<f64>,
    log_weight: Vec<f64>,
    /// A_j = b_j + t + z_· + a_·
    full: Vec<f64>,
    /// b_j + t
    resid: Vec<f64>,
}

impl AtomState {
    fn new(mix: &Mixture, nu: usize, t: &[f64], totals: &[u64]) -> Self {
        let log_weight = mix.posterior_log_weights(t, totals);
        let weight = log_weight.iter().map(|v| v.exp()).collect();
        let resid: Vec<f64> = mix.b.iter().map(|b| b[nu] + t[nu]).collect();
        let full = resid.iter().map(|c| c + totals[nu] as f64 + mix.a_dot[nu]).collect();
        Self { weight, log_weight, full, resid }
    }

    /// E[−ln p₀ | z]
    fn neg_log_p0(&self) -> f64 {
        self.weight
            .iter()
            .zip(self.full.iter().zip(&self.resid))
            .map(|(w, (a, b))| w * (digamma(*a) - digamma(*b)))
            .sum()
    }

    /// E[ψ(A)]: E[−ln p_i | z] = E[ψ(A)] − ψ(z_i + a_i).
    fn mean_digamma_full(&self) -> f64 {
        self.weight.iter().zip(&self.full).map(|(w, a)| w * digamma(*a)).sum()
    }

    /// H(k) = ln E[Γ(A)/Γ(A+k)] for k = 0..=k_max.
    fn h_table(&self, k_max: usize) -> Vec<f64> {
        let mut cum = self.log_weight.clone();
        let mut out = Vec::with_capacity(k_max + 1);
        out.push(log_sum_exp(&cum));
        for k in 0..k_max {
            for (c, a) in cum.iter_mut().zip(&self.full) {
                *c -= (a + k as f64).ln();
            }
            out.push(if cum.len() == 1 { cum[0] } else { log_sum_exp(&cum) });
        }
        out
    }
}

/// Envelope α + β z_· on the magnitude of E[−ln p | z] for any cell or the
/// residual: ln(c + z_·) − ψ_min ≤ κ + z_·/c. Returns (κ, c).
fn posterior_log_envelope(mix: &Mixture, nu: usize, t: f64) -> (f64, f64) {
    let b_max = mix.b.iter().map(|b| b[nu]).fold(f64::NEG_INFINITY, f64::max);
    let b_min = mix.b.iter().map(|b| b[nu]).fold(f64::INFINITY, f64::min);
    let c = b_max + t + mix.a_dot[nu];
    let a_min = mix.a[nu].iter().copied().fold(f64::INFINITY, f64::min);
    let psi_min = digamma(b_min + t).min(digamma(a_min));
    ((c.ln() - psi_min).max(0.0), c)
}

/// Lattice coordinates for an expectation over Z(τ) that depends on the cells of
/// population `nu` (when `cells`) and on the totals of the others that matter.
struct ZLattice {
    coords: Vec<(usize, f64, f64, u64)>,
    points: Vec<Vec<(Vec<u64>, f64)>>,
    product: ProductLattice,
}

impl ZLattice {
    fn new(
        p: &ProbParam,
        spec: &ModelSpec,
        t: &[f64],
        nu: usize,
        cells: bool,
        others: bool,
        settings: &RhsSettings,
    ) -> Result<Self> {
        let n_pop = spec.populations();
        let pops: Vec<usize> = if others { (0..n_pop).collect() } else { vec![nu] };
        let per = settings.trunc / pops.len() as f64;
        let mut coords = Vec::new();
        let mut points = Vec::new();
        let mut size = 1.0f64;
        for &mu in &pops {
            let pd = p.p_dot(mu);
            let radius = nb_truncation_radius(t[mu], pd, per);
            let pts: Vec<(Vec<u64>, f64)> = if cells && mu == nu {
                let mut v = Vec::new();
                for k in 0..=radius {
                    for z in compositions(k, spec.m[mu]) {
                        let lp = negmn_log_pmf(&z, t[mu], &p.p[mu]).expect("validated parameters");
                        v.push((z, lp));
                    }
                    if v.len() as f64 * size > settings.budget as f64 {
                        return Err(Error::Resource(format!(
                            "Z lattice exceeds the budget of {} points",
                            settings.budget
                        )));
                    }
                }
                v
            } else {
                (0..=radius).map(|k| (vec![k], nb_log_pmf(k, t[mu], pd))).collect()
            };
            size *= pts.len() as f64;
            if size > settings.budget as f64 {
                return Err(Error::Resource(format!("Z lattice exceeds the budget of {} points", settings.budget)));
            }
            coords.push((mu, t[mu], pd, radius));
            points.push(pts);
        }
        let product = ProductLattice::new(points.iter().map(|v| v.len()).collect());
        Ok(Self { coords, points, product })
    }

    /// (cells of `nu` or its total as a 1-vector, totals of every population, log pmf)
    fn point(&self, flat: usize, nu: usize, n_pop: usize) -> (Vec<u64>, Vec<u64>, f64) {
        let idx = self.product.unflatten(flat);
        let mut totals = vec![0; n_pop];
        let mut own = Vec::new();
        let mut lp = 0.0;
        for ((c, pts), &k) in self.coords.iter().zip(&self.points).zip(&idx) {
            let (v, l) = &pts[k];
            lp += l;
            totals[c.0] = v.iter().sum();
            if c.0 == nu {
                own = v.clone();
            }
        }
        (own, totals, lp)
    }

    /// Bound on Σ_{outside} P(z)(α + β z_{·,nu}).
    fn tail(&self, nu: usize, alpha: f64, beta: f64) -> f64 {
        let own = self.coords.iter().find(|c| c.0 == nu).expect("own population is a coordinate");
        let mean = alpha + beta * nb_mean(own.1, own.2);
        self.coords
            .iter()
            .map(|&(mu, t, pd, radius)| {
                if mu == nu {
                    nb_tail_linear_bound(radius, t, pd, alpha, beta)
                } else {
                    mean * nb_tail_bound(radius, t, pd)
                }
            })
            .sum()
    }
}

/// Σ_i p_i ln p_i / p₀
fn theta_log_theta(p: &[f64]) -> f64 {
    let pd: f64 = p.iter().sum();
    p.iter().map(|&q| q * q.ln()).sum::<f64>() / (1.0 - pd)
}

/// Binomial(k, π) pmf rows for k = 0..=k_max.
fn binomial_rows(pi: f64, k_max: usize) -> Vec<Vec<f64>> {
    (0..=k_max)
        .map(|k| {
            (0..=k)
                .map(|j| {
                    let (jf, rest) = (j as f64, (k - j) as f64);
                    if pi >= 1.0 {
                        return if j == k { 1.0 } else { 0.0 };
                    }
                    let lc = ln_factorial(k as u64) - ln_factorial(j as u64) - ln_factorial((k - j) as u64);
                    let a = if j == 0 { 0.0 } else { jf * pi.ln() };
                    let b = if k == j { 0.0 } else { rest * (-pi).ln_1p() };
                    (lc + a + b).exp()
                })
                .collect()
        })
        .collect()
}

/// E over Z(τ) of the inner path-integral sum for population `nu`, with its bound.
fn theorem4_inner(
    p: &ProbParam,
    spec: &ModelSpec,
    mix: &Mixture,
    t: &[f64],
    nu: usize,
    binom: &[Vec<Vec<f64>>],
    settings: &RhsSettings,
) -> Result<(f64, f64)> {
    let k_max = settings.k_max;
    let n_pop = spec.populations();
    let lattice = ZLattice::new(p, spec, t, nu, true, mix.atoms() > 1, settings)?;
    let radius = lattice.coords.iter().find(|c| c.0 == nu).expect("own coordinate").3 as usize;
    let m = spec.m[nu];
    let pd = p.p_dot(nu);
    let p0 = 1.0 - pd;
    // EG[i][z][k] = E_{W~Bin(k, p_i/p_·)} [ln Γ(z + a_i + W) − ln Γ(z + a_i)]
    let eg: Vec<Vec<Vec<f64>>> = (0..m)
        .map(|i| {
            (0..=radius)
                .map(|z| {
                    let base = z as f64 + mix.a[nu][i];
                    let mut g = Vec::with_capacity(k_max + 1);
                    let mut acc = 0.0;
                    g.push(0.0);
                    for l in 0..k_max {
                        acc += (base + l as f64).ln();
                        g.push(acc);
                    }
                    (0..=k_max).map(|k| binom[i][k].iter().zip(&g).map(|(b, gv)| b * gv).sum()).collect()
                })
                .collect()
        })
        .collect();
    let coef: Vec<f64> = (0..=k_max).map(|k| if k == 0 { 0.0 } else { pd.powi(k as i32) / k as f64 }).collect();
    let b_closed = theta_log_theta(&p.p[nu]);
    let k_tail = pd.powi(k_max as i32 + 1) / p0;
    let rows: Vec<(f64, f64, f64)> = (0..lattice.product.len())
        .into_par_iter()
        .map(|flat| {
            let (z, totals, lp) = lattice.point(flat, nu, n_pop);
            let st = AtomState::new(mix, nu, t, &totals);
            let a_part = st.neg_log_p0() + p0.ln();
            let h = st.h_table(k_max);
            let mut c_terms = Vec::with_capacity(k_max);
            for k in 1..=k_max {
                let cells: f64 = (0..m).map(|i| eg[i][z[i] as usize][k]).sum();
                c_terms.push(-coef[k] * (h[k] + cells));
            }
            let c_part = pairwise_sum(&c_terms);
            let psi_full = st.mean_digamma_full();
            let b_z = (0..m).map(|i| psi_full - digamma(z[i] as f64 + mix.a[nu][i])).fold(0.0, f64::max);
            let w = lp.exp();
            let inner = a_part + b_closed + c_part;
            let scale = 1.0 + a_part.abs() + b_closed.abs() + c_terms.iter().map(|v| v.abs()).sum::<f64>();
            (w * inner, w * b_z * k_tail, w * scale)
        })
        .collect();
    let value = pairwise_sum(&rows.iter().map(|r| r.0).collect::<Vec<_>>());
    let k_bound: f64 = rows.iter().map(|r| r.1).sum();
    let round: f64 = rows.iter().map(|r| r.2).sum::<f64>() * f64::EPSILON * 512.0;
    let (kappa, c) = posterior_log_envelope(mix, nu, t[nu]);
    let ratio = pd / p0;
    let alpha = kappa * (1.0 + ratio) - p0.ln() + b_closed.abs();
    let beta = (1.0 + ratio) / c;
    Ok((value, k_bound + round + lattice.tail(nu, alpha, beta)))
}

/// ∫₀¹ f(τ) dτ with `n` Gauss–Legendre nodes and the comparison rule with n/2;
/// `f` returns a value and a bound on its own error.
fn tau_integral(n: usize, f: impl Fn(f64) -> Result<(f64, f64)> + Sync) -> Result<RiskValue> {
    let rule = |nodes: usize| -> Result<(f64, f64)> {
        let (x, w) = gauss_legendre(nodes);
        let parts: Vec<(f64, f64)> = x
            .par_iter()
            .zip(w.par_iter())
            .map(|(&xi, &wi)| f(0.5 * (xi + 1.0)).map(|(v, e)| (0.5 * wi * v, 0.5 * wi * e)))
            .collect::<Result<_>>()?;
        Ok((pairwise_sum(&parts.iter().map(|p| p.0).collect::<Vec<_>>()), parts.iter().map(|p| p.1).sum()))
    };
    let (fine, fine_err) = rule(n)?;
    let (coarse, _) = rule((n / 2).max(1))?;
    Ok(RiskValue { value: fine, error: fine_err + (fine - coarse).abs() })
}

fn check_common(p: &ProbParam, spec: &ModelSpec, fut: &FutureSpec, settings: &RhsSettings) -> Result<()> {
    spec.validate()?;
    fut.validate(spec)?;
    p.check_against(spec)?;
    settings.validate()
}

/// ∫₀¹ Σ_{ν<n} t_ν′(τ) Σ_k (1/k) Σ_w mult(k; w) E[L(E_π[θ_w | Z(τ)], θ_w)] dτ.
pub fn kl_risk_rhs_theorem4(
    p: &ProbParam,
    spec: &ModelSpec,
    fut: &FutureSpec,
    prior: NmPrior<'_>,
    settings: &RhsSettings,
) -> Result<RiskValue> {
    check_common(p, spec, fut, settings)?;
    let mix = Mixture::new(prior, spec)?;
    let binom: Vec<Vec<Vec<Vec<f64>>>> = (0..fut.n())
        .map(|nu| {
            let pd = p.p_dot(nu);
            p.p[nu].iter().map(|&pi| binomial_rows(pi / pd, settings.k_max)).collect()
        })
        .collect();
    tau_integral(settings.tau_nodes, |tau| {
        let t: Vec<f64> = (0..spec.populations()).map(|nu| fut.shape(spec, nu, tau)).collect();
        let mut value = 0.0;
        let mut err = 0.0;
        for nu in 0..fut.n() {
            let rate = fut.shape_rate(nu, tau);
            if rate == 0.0 {
                continue;
            }
            let (v, e) = theorem4_inner(p, spec, &mix, &t, nu, &binom[nu], settings)?;
            value += rate * v;
            err += rate * e;
        }
        Ok((value, err))
    })
}

/// ∫₀¹ Σ_{ν<n} t_ν′(τ) Σ_k (1/k) E[L(E_M[p_·^k | Z], p_·^k) − L(E_D[p_·^k | Z], p_·^k)] dτ,
/// the risk of the mixture-prior predictive minus that of the Dirichlet one.
/// Both priors must share the cell parameters a.
pub fn kl_risk_diff_corollary3(
    p: &ProbParam,
    spec: &ModelSpec,
    fut: &FutureSpec,
    prior_m: &GeneralShrinkagePriorSpec,
    prior_d: &DirichletPriorSpec,
    settings: &RhsSettings,
) -> Result<RiskValue> {
    check_common(p, spec, fut, settings)?;
    if prior_m.base.a != prior_d.a {
        return Err(Error::Contract("both priors must use the same cell parameters a".into()));
    }
    let mm = Mixture::new(prior_m.into(), spec)?;
    let md = Mixture::new(prior_d.into(), spec)?;
    let k_max = settings.k_max;
    let n_pop = spec.populations();
    tau_integral(settings.tau_nodes, |tau| {
        let t: Vec<f64> = (0..n_pop).map(|nu| fut.shape(spec, nu, tau)).collect();
        let mut value = 0.0;
        let mut err = 0.0;
        for nu in 0..fut.n() {
            let rate = fut.shape_rate(nu, tau);
            if rate == 0.0 {
                continue;
            }
            let pd = p.p_dot(nu);
            let p0 = 1.0 - pd;
            let lattice = ZLattice::new(p, spec, &t, nu, false, mm.atoms() > 1, settings)?;
            let coef: Vec<f64> = (0..=k_max).map(|k| if k == 0 { 0.0 } else { pd.powi(k as i32) / k as f64 }).collect();
            let k_tail = pd.powi(k_max as i32 + 1) / p0;
            let rows: Vec<(f64, f64, f64)> = (0..lattice.product.len())
                .into_par_iter()
                .map(|flat| {
                    let (_, totals, lp) = lattice.point(flat, nu, n_pop);
                    let sm = AtomState::new(&mm, nu, &t, &totals);
                    let sd = AtomState::new(&md, nu, &t, &totals);
                    let (hm, hd) = (sm.h_table(k_max), sd.h_table(k_max));
                    let mean_part = sm.neg_log_p0() - sd.neg_log_p0();
                    let terms: Vec<f64> = (1..=k_max).map(|k| -coef[k] * (hm[k] - hd[k])).collect();
                    let series = pairwise_sum(&terms);
                    let psi_dot = digamma(totals[nu] as f64 + mm.a_dot[nu]);
                    let b = (sm.mean_digamma_full() - psi_dot).max(sd.mean_digamma_full() - psi_dot).max(0.0);
                    let w = lp.exp();
                    let scale = 1.0 + mean_part.abs() + terms.iter().map(|v| v.abs()).sum::<f64>();
                    (w * (mean_part + series), w * b * k_tail, w * scale)
                })
                .collect();
            let v = pairwise_sum(&rows.iter().map(|r| r.0).collect::<Vec<_>>());
            let k_bound: f64 = rows.iter().map(|r| r.1).sum();
            let round: f64 = rows.iter().map(|r| r.2).sum::<f64>() * f64::EPSILON * 512.0;
            let (km, cm) = posterior_log_envelope(&mm, nu, t[nu]);
            let (kd, cd) = posterior_log_envelope(&md, nu, t[nu]);
            let (kappa, c) = (km.max(kd), cm.min(cd));
            let factor = 2.0 + pd / p0;
            let tail = lattice.tail(nu, kappa * factor, factor / c);
            value += rate * v;
            err += rate * (k_bound + round + tail);
        }
        Ok((value, err))
    })
}

/// Exact risk against the path-integral form.
pub fn verify_theorem4(
    p: &ProbParam,
    spec: &ModelSpec,
    fut: &FutureSpec,
    prior: NmPrior<'_>,
    settings: &RhsSettings,
) -> Result<IdentityReport> {
    let lhs = kl_risk_lhs(p, spec, fut, prior, &LhsMethod::Exact { trunc: settings.trunc, budget: settings.budget })?;
    let rhs = kl_risk_rhs_theorem4(p, spec, fut, prior, settings)?;
    Ok(IdentityReport::new(lhs, rhs))
}

/// Difference of two exact risks against the path-integral form of the difference.
pub fn verify_corollary3(
    p: &ProbParam,
    spec: &ModelSpec,
    fut: &FutureSpec,
    prior_m: &GeneralShrinkagePriorSpec,
    prior_d: &DirichletPriorSpec,
    settings: &RhsSettings,
) -> Result<IdentityReport> {
    let method = LhsMethod::Exact { trunc: settings.trunc, budget: settings.budget };
    let lm = kl_risk_lhs(p, spec, fut, prior_m.into(), &method)?;
    let ld = kl_risk_lhs(p, spec, fut, prior_d.into(), &method)?;
    let lhs = RiskValue { value: lm.value - ld.value, error: lm.error + ld.error };
    let rhs = kl_risk_diff_corollary3(p, spec, fut, prior_m, prior_d, settings)?;
    Ok(IdentityReport::new(lhs, rhs))
}
