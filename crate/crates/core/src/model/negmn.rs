use rand::Rng;
use rand_distr::{Binomial, Distribution};

use super::lattice::{compositions, ProductLattice};
use super::{check_sub_simplex, CountData, ModelSpec, ProbParam};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::special::{ln_factorial, ln_gamma, ln_gamma_real};

/// log of Γ(r+Σx)/(Γ(r)∏x_i!) · p₀^r ∏ p_i^{x_i}.
pub fn negmn_log_pmf<T: Real>(x: &[u64], r: T, p: &[T]) -> Result<T> {
    check_sub_simplex(p).map_err(Error::Domain)?;
    if x.len() != p.len() {
        return Err(Error::domain(format!("x has {} cells, p has {}", x.len(), p.len())));
    }
    if !(r > T::zero()) {
        return Err(Error::domain(format!("shape r = {r:?} must be positive")));
    }
    let total: u64 = x.iter().sum();
    let p_dot = p.iter().fold(T::zero(), |a, &b| a + b);
    let mut out = ln_gamma_real(r + T::from_count(total)) - ln_gamma_real(r)
        + r * (T::one() - p_dot).ln();
    for (&xi, &pi) in x.iter().zip(p) {
        if xi > 0 {
            let xi_t = T::from_count(xi);
            out = out - T::lit(ln_factorial(xi)) + xi_t * pi.ln();
        }
    }
    Ok(out)
}

/// Joint log pmf of independent populations.
pub fn negmn_log_pmf_counts(x: &CountData, spec: &ModelSpec, p: &ProbParam) -> Result<f64> {
    x.check_against(spec)?;
    p.check_against(spec)?;
    let mut out = 0.0;
    for nu in 0..spec.populations() {
        out += negmn_log_pmf(&x.x[nu], spec.r[nu], &p.p[nu])?;
    }
    Ok(out)
}

/// log of Γ(r+k)/(Γ(r)k!) p₀^r p_·^k with p₀ = 1 − p_·.
pub fn nb_log_pmf(k: u64, r: f64, p_dot: f64) -> f64 {
    let kf = k as f64;
    let tail = if k == 0 { 0.0 } else { kf * p_dot.ln() };
    ln_gamma(r + kf) - ln_gamma(r) - ln_factorial(k) + r * (-p_dot).ln_1p() + tail
}

/// Upper bound on P(K > radius) for K negative binomial. For k > radius the
/// successive ratio (r+k)/(k+1)·p_· is monotone in k with limit p_·, so it never
/// exceeds q = max(ratio at radius+1, p_·) and the tail is below a geometric series.
pub fn nb_tail_bound(radius: u64, r: f64, p_dot: f64) -> f64 {
    let k1 = radius + 1;
    let ratio = (r + k1 as f64) / (k1 as f64 + 1.0) * p_dot;
    let q = ratio.max(p_dot);
    if q >= 1.0 {
        return f64::INFINITY;
    }
    nb_log_pmf(k1, r, p_dot).exp() / (1.0 - q)
}

/// Upper bound on Σ_{k>radius} P(K = k)·(a + b·k) for a, b ≥ 0, using the same
/// geometric domination as [`nb_tail_bound`].
pub fn nb_tail_linear_bound(radius: u64, r: f64, p_dot: f64, a: f64, b: f64) -> f64 {
    let k1 = radius + 1;
    let ratio = (r + k1 as f64) / (k1 as f64 + 1.0) * p_dot;
    let q = ratio.max(p_dot);
    if q >= 1.0 {
        return f64::INFINITY;
    }
    let head = nb_log_pmf(k1, r, p_dot).exp();
    head * ((a + b * k1 as f64) / (1.0 - q) + b * q / ((1.0 - q) * (1.0 - q)))
}

/// E[K] = r p_·/p₀
pub fn nb_mean(r: f64, p_dot: f64) -> f64 {
    r * p_dot / (1.0 - p_dot)
}

/// Smallest radius whose certified tail is at most `trunc`.
pub fn nb_truncation_radius(r: f64, p_dot: f64, trunc: f64) -> u64 {
    let mean = r * p_dot / (1.0 - p_dot);
    let mut k = mean.floor() as u64;
    // The bound is loose before the ratio drops below one; start searching at the mean.
    while nb_tail_bound(k, r, p_dot) > trunc {
        k += 1;
    }
    // Walk back while still certified, so the radius is minimal among k ≥ 0.
    while k > 0 && nb_tail_bound(k - 1, r, p_dot) <= trunc {
        k -= 1;
    }
    k
}

/// Draws the negative binomial total by inverting its CDF with the ratio
/// recurrence. Terms that underflow are recomputed from log-gamma directly.
pub fn nb_sample<R: Rng + ?Sized>(rng: &mut R, r: f64, p_dot: f64) -> u64 {
    let u: f64 = rng.random();
    let mut k = 0u64;
    let mut term = nb_log_pmf(0, r, p_dot).exp();
    let mut cdf = term;
    let mode = ((r - 1.0) * p_dot / (1.0 - p_dot)).max(0.0);
    while cdf < u {
        let next = if term > 0.0 {
            term * (r + k as f64) / (k as f64 + 1.0) * p_dot
        } else {
            nb_log_pmf(k + 1, r, p_dot).exp()
        };
        k += 1;
        term = next;
        let before = cdf;
        cdf += term;
        // Past the mode with no change in the running sum, the remaining mass is
        // below rounding; stop rather than walk forever.
        if cdf == before && (k as f64) > mode {
            break;
        }
    }
    k
}

/// Multinomial(n, probs) by sequential conditional binomials; `probs` must sum to 1.
pub fn multinomial_sample<R: Rng + ?Sized>(rng: &mut R, n: u64, probs: &[f64]) -> Vec<u64> {
    let mut out = vec![0; probs.len()];
    let mut left = n;
    let mut mass = 1.0;
    for (i, &pi) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i + 1 == probs.len() {
            out[i] = left;
            break;
        }
        let cond = (pi / mass).clamp(0.0, 1.0);
        let draw = Binomial::new(left, cond).expect("probability clamped to [0, 1]").sample(rng);
        out[i] = draw;
        left -= draw;
        mass -= pi;
    }
    out
}

/// One negative multinomial vector: total K ~ NB(r, p₀), then K split multinomially.
pub fn negmn_sample<R: Rng + ?Sized>(rng: &mut R, r: f64, p: &[f64]) -> Result<Vec<u64>> {
    check_sub_simplex(p).map_err(Error::Domain)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::domain(format!("shape r = {r} must be positive")));
    }
    let p_dot: f64 = p.iter().sum();
    let total = nb_sample(rng, r, p_dot);
    let probs: Vec<f64> = p.iter().map(|&pi| pi / p_dot).collect();
    Ok(multinomial_sample(rng, total, &probs))
}

/// Independent draws for every population.
pub fn sample_counts<R: Rng + ?Sized>(rng: &mut R, spec: &ModelSpec, p: &ProbParam) -> Result<CountData> {
    p.check_against(spec)?;
    let mut x = Vec::with_capacity(spec.populations());
    for nu in 0..spec.populations() {
        x.push(negmn_sample(rng, spec.r[nu], &p.p[nu])?);
    }
    Ok(CountData::new(x))
}

/// The finite support {x : X_{·,ν} ≤ radius_ν for all ν} together with log pmf
/// values. The per-population tails are each at most trunc/N, so the neglected
/// mass is at most `trunc`.
#[derive(Debug, Clone)]
pub struct TruncatedLattice {
    pub radii: Vec<u64>,
    /// Certified bound on the probability outside the lattice.
    pub tail_bound: f64,
    rows: Vec<Vec<(Vec<u64>, f64)>>,
    product: ProductLattice,
}

impl TruncatedLattice {
    pub fn new(spec: &ModelSpec, p: &ProbParam, trunc: f64, budget: usize) -> Result<Self> {
        p.check_against(spec)?;
        if !(trunc > 0.0 && trunc < 1.0) {
            return Err(Error::domain(format!("truncation level {trunc} must lie in (0, 1)")));
        }
        let n = spec.populations();
        let per = trunc / n as f64;
        let mut radii = Vec::with_capacity(n);
        let mut tail_bound = 0.0;
        let mut size: f64 = 1.0;
        for nu in 0..n {
            let pd = p.p_dot(nu);
            let k = nb_truncation_radius(spec.r[nu], pd, per);
            tail_bound += nb_tail_bound(k, spec.r[nu], pd);
            // Number of vectors of length m with sum ≤ k is C(k+m, m).
            let m = spec.m[nu] as f64;
            let count = (crate::special::ln_gamma(k as f64 + m + 1.0)
                - crate::special::ln_gamma(k as f64 + 1.0)
                - crate::special::ln_gamma(m + 1.0))
            .exp();
            size *= count;
            radii.push(k);
        }
        if size > budget as f64 {
            return Err(Error::Resource(format!(
                "truncated lattice needs about {size:.3e} points, budget is {budget}"
            )));
        }
        let mut rows = Vec::with_capacity(n);
        for nu in 0..n {
            let mut row = Vec::new();
            for total in 0..=radii[nu] {
                for x in compositions(total, spec.m[nu]) {
                    let lp = negmn_log_pmf(&x, spec.r[nu], &p.p[nu])?;
                    row.push((x, lp));
                }
            }
            rows.push(row);
        }
        let product = ProductLattice::new(rows.iter().map(Vec::len).collect());
        Ok(Self { radii, tail_bound, rows, product })
    }

    pub fn len(&self) -> usize {
        self.product.len()
    }

    pub fn is_empty(&self) -> bool {
        self.product.is_empty()
    }

    /// The `flat`-th point and its joint log pmf.
    pub fn point(&self, flat: usize) -> (CountData, f64) {
        let idx = self.product.unflatten(flat);
        let mut x = Vec::with_capacity(idx.len());
        let mut lp = 0.0;
        for (nu, &j) in idx.iter().enumerate() {
            let (v, l) = &self.rows[nu][j];
            x.push(v.clone());
            lp += l;
        }
        (CountData::new(x), lp)
    }

    pub fn iter(&self) -> impl Iterator<Item = (CountData, f64)> + '_ {
        (0..self.len()).map(move |f| self.point(f))
    }
}
