use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FutureSpec, Mixture, NmPrior};
use crate::error::{Error, Result};
use crate::model::{
    compositions, nb_log_pmf, nb_mean, nb_tail_bound, nb_tail_linear_bound, nb_truncation_radius, negmn_log_pmf,
    negmn_sample, CountData, ModelSpec, ProbParam, ProductLattice,
};
use crate::rng::RngSpec;
use crate::special::{digamma, pairwise_sum};

/// d − θ − θ log(d/θ)
pub fn kl_loss_pointwise(d: f64, theta: f64) -> Result<f64> {
    if !(d > 0.0 && theta > 0.0 && d.is_finite() && theta.is_finite()) {
        return Err(Error::domain(format!("KL loss needs positive arguments, got d = {d}, theta = {theta}")));
    }
    Ok((d - theta - theta * (d / theta).ln()).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LhsMethod {
    /// Sum over the lattice whose per-coordinate tails are each at most
    /// trunc / (number of coordinates).
    Exact { trunc: f64, budget: usize },
    MonteCarlo { reps: usize, rng: RngSpec },
}

/// A risk value with a certified bound (exact methods) or a standard error (Monte Carlo).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskValue {
    pub value: f64,
    pub error: f64,
}

/// log p₀^{s} ∏ p^{y}: log g(y|p) without its combinatorial factor.
fn log_kernel(y: &[Vec<u64>], p: &ProbParam, fut: &FutureSpec) -> f64 {
    let mut out = 0.0;
    for (nu, row) in y.iter().enumerate() {
        out += fut.s[nu] * p.p0(nu).ln();
        for (i, &yi) in row.iter().enumerate() {
            if yi > 0 {
                out += yi as f64 * p.p[nu][i].ln();
            }
        }
    }
    out
}

/// The plug-in predictive at `p` in the same "log mass minus combinatorial factor"
/// form the risk evaluator consumes; its risk is exactly zero.
pub fn log_plugin_ratio<'a>(p: &'a ProbParam, fut: &'a FutureSpec) -> impl Fn(&[Vec<u64>], &CountData) -> f64 + Sync + 'a {
    move |y, _x| log_kernel(y, p, fut)
}

/// All cell vectors with total ≤ radius and their log pmf under NM(r, p).
fn cell_lattice(r: f64, p: &[f64], radius: u64) -> Vec<(Vec<u64>, f64)> {
    let mut out = Vec::new();
    for k in 0..=radius {
        for v in compositions(k, p.len()) {
            let lp = negmn_log_pmf(&v, r, p).expect("validated parameters");
            out.push((v, lp));
        }
    }
    out
}

/// Lattice size C(radius + m, m), as a float so huge values do not overflow.
fn cell_count(radius: u64, m: usize) -> f64 {
    use crate::special::ln_gamma;
    (ln_gamma(radius as f64 + m as f64 + 1.0) - ln_gamma(radius as f64 + 1.0) - ln_gamma(m as f64 + 1.0))
        .exp()
        .round()
}

struct Coord {
    /// population index
    nu: usize,
    future: bool,
    r: f64,
    p_dot: f64,
    radius: u64,
    points: Vec<(Vec<u64>, f64)>,
}

/// Exact lattice sum of P(x)P(y)·h(x, y). `env` gives the per-population
/// coefficients (λ_ν, κ_ν, c_ν) of the envelope |h| ≤ Σ_ν (s_ν + Y_·ν)(λ_ν + κ_ν + X_·ν/c_ν)
/// used for the tail; `None` skips the tail and certifies only rounding.
fn lhs_exact(
    p: &ProbParam,
    spec: &ModelSpec,
    fut: &FutureSpec,
    log_ratio: &(dyn Fn(&[Vec<u64>], &CountData) -> f64 + Sync),
    x_beyond_n: bool,
    env: Option<Vec<(f64, f64, f64)>>,
    trunc: f64,
    budget: usize,
) -> Result<RiskValue> {
    if !(trunc > 0.0 && trunc < 1.0) {
        return Err(Error::domain(format!("truncation level {trunc} must lie in (0, 1)")));
    }
    let n = fut.n();
    let n_pop = spec.populations();
    let mut shapes: Vec<(usize, bool)> = Vec::new();
    for nu in 0..n {
        shapes.push((nu, false));
        shapes.push((nu, true));
    }
    if x_beyond_n {
        for nu in n..n_pop {
            shapes.push((nu, false));
        }
    }
    let per = trunc / shapes.len() as f64;
    let mut size = 1.0f64;
    let mut coords = Vec::with_capacity(shapes.len());
    for (nu, future) in shapes {
        let r = if future { fut.s[nu] } else { spec.r[nu] };
        let p_dot = p.p_dot(nu);
        let radius = nb_truncation_radius(r, p_dot, per);
        // Populations without future data enter only through their totals.
        let cells = nu < n;
        size *= if cells { cell_count(radius, spec.m[nu]) } else { radius as f64 + 1.0 };
        if size > budget as f64 {
            return Err(Error::Resource(format!("risk lattice needs {size:.3e} points, budget is {budget}")));
        }
        let points = if cells {
            cell_lattice(r, &p.p[nu], radius)
        } else {
            (0..=radius)
                .map(|k| {
                    let mut v = vec![0; spec.m[nu]];
                    v[0] = k;
                    (v, nb_log_pmf(k, r, p_dot))
                })
                .collect()
        };
        coords.push(Coord { nu, future, r, p_dot, radius, points });
    }
    let lattice = ProductLattice::new(coords.iter().map(|c| c.points.len()).collect());
    let terms: Vec<(f64, f64)> = (0..lattice.len())
        .into_par_iter()
        .map(|flat| {
            let idx = lattice.unflatten(flat);
            let mut x = CountData::zeros(spec);
            let mut y = vec![Vec::new(); n];
            let mut lp = 0.0;
            for (c, &k) in coords.iter().zip(&idx) {
                let (v, l) = &c.points[k];
                lp += l;
                if c.future {
                    y[c.nu] = v.clone();
                } else {
                    x.x[c.nu] = v.clone();
                }
            }
            let (k, g) = (log_kernel(&y, p, fut), log_ratio(&y, &x));
            let w = lp.exp();
            (w * (k - g), w * (1.0 + k.abs() + g.abs()))
        })
        .collect();
    let (terms, scales): (Vec<f64>, Vec<f64>) = terms.into_iter().unzip();
    let value = pairwise_sum(&terms);
    // Each h carries a few hundred ulp of log-gamma cancellation at most; the sum
    // itself adds O(log n) ulp.
    let scale: f64 = scales.iter().sum();
    let mut error = scale * f64::EPSILON * (512.0 + (terms.len() as f64).log2());
    if let Some(env) = env {
        // Union bound over coordinates: the outside region lies in ∪_c {total_c > radius_c}.
        for nu in 0..n {
            let (lam, kappa, c) = env[nu];
            let s = fut.s[nu];
            let f_mean = s + nb_mean(s, p.p_dot(nu));
            let g_mean = lam + kappa + nb_mean(spec.r[nu], p.p_dot(nu)) / c;
            for co in &coords {
                error += if co.nu == nu && co.future {
                    nb_tail_linear_bound(co.radius, co.r, co.p_dot, s, 1.0) * g_mean
                } else if co.nu == nu {
                    f_mean * nb_tail_linear_bound(co.radius, co.r, co.p_dot, lam + kappa, 1.0 / c)
                } else {
                    f_mean * g_mean * nb_tail_bound(co.radius, co.r, co.p_dot)
                };
            }
        }
    }
    Ok(RiskValue { value, error })
}

/// Envelope coefficients (λ, κ, c) for each future population; see [`lhs_exact`].
fn lhs_envelope(p: &ProbParam, spec: &ModelSpec, fut: &FutureSpec, mix: &Mixture) -> Vec<(f64, f64, f64)> {
    (0..fut.n())
        .map(|nu| {
            let p_min = p.p[nu].iter().copied().fold(p.p0(nu), f64::min);
            let lam = -p_min.ln();
            let r = spec.r[nu];
            let b_max = mix.b.iter().map(|b| b[nu]).fold(f64::NEG_INFINITY, f64::max);
            let b_min = mix.b.iter().map(|b| b[nu]).fold(f64::INFINITY, f64::min);
            let c = b_max + r + mix.a_dot[nu];
            let a_min = mix.a[nu].iter().copied().fold(f64::INFINITY, f64::min);
            let psi_min = digamma(b_min + r).min(digamma(a_min));
            let kappa = (c.ln() - psi_min).max(0.0);
            (lam, kappa, c)
        })
        .collect()
}

/// E[log g(Y|p) − log ĝ(Y; X)] over independent X ~ NM(r, p) and Y ~ NM(s, p).
pub fn kl_risk_lhs(
    p: &ProbParam,
    spec: &ModelSpec,
    fut: &FutureSpec,
    prior: NmPrior<'_>,
    method: &LhsMethod,
) -> Result<RiskValue> {
    spec.validate()?;
    fut.validate(spec)?;
    p.check_against(spec)?;
    let mix = Mixture::new(prior, spec)?;
    let ratio = |y: &[Vec<u64>], x: &CountData| mix.log_ratio(y, x, spec, fut);
    match *method {
        LhsMethod::Exact { trunc, budget } => {
            let env = lhs_envelope(p, spec, fut, &mix);
            lhs_exact(p, spec, fut, &ratio, mix.atoms() > 1, Some(env), trunc, budget)
        }
        LhsMethod::MonteCarlo { reps, rng } => lhs_mc(p, spec, fut, &ratio, reps, rng),
    }
}

/// [`kl_risk_lhs`] for an arbitrary predictive given as log ĝ minus the
/// combinatorial factor of y. The reported error covers rounding only, not the
/// lattice tail.
pub fn kl_risk_lhs_with(
    p: &ProbParam,
    spec: &ModelSpec,
    fut: &FutureSpec,
    log_ratio: &(dyn Fn(&[Vec<u64>], &CountData) -> f64 + Sync),
    trunc: f64,
    budget: usize,
) -> Result<RiskValue> {
    spec.validate()?;
    fut.validate(spec)?;
    p.check_against(spec)?;
    lhs_exact(p, spec, fut, log_ratio, true, None, trunc, budget)
}

fn lhs_mc(
    p: &ProbParam,
    spec: &ModelSpec,
    fut: &FutureSpec,
    log_ratio: &(dyn Fn(&[Vec<u64>], &CountData) -> f64 + Sync),
    reps: usize,
    rng: RngSpec,
) -> Result<RiskValue> {
    if reps < 2 {
        return Err(Error::domain("Monte Carlo needs at least two replications"));
    }
    let values: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|rep| -> Result<f64> {
            let mut g = RngSpec::for_replication(rng.seed, rng.stream, rep as u64).rng();
            let mut x = Vec::with_capacity(spec.populations());
            for nu in 0..spec.populations() {
                x.push(negmn_sample(&mut g, spec.r[nu], &p.p[nu])?);
            }
            let mut y = Vec::with_capacity(fut.n());
            for nu in 0..fut.n() {
                y.push(negmn_sample(&mut g, fut.s[nu], &p.p[nu])?);
            }
            let x = CountData::new(x);
            Ok(log_kernel(&y, p, fut) - log_ratio(&y, &x))
        })
        .collect::<Result<_>>()?;
    let mean = pairwise_sum(&values) / reps as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    Ok(RiskValue { value: mean, error: (var / reps as f64).sqrt() })
}
