//! Log-gamma, digamma and log-space summation helpers.

use crate::scalar::Real;

/// Natural log of |Γ(x)|.
///
/// Backed by the FreeBSD-derived `lgamma_r` from `libm`, which stays within a
/// couple of ulp on the positive axis, including near the zeros at 1 and 2.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma_r(x).0
}

/// [`ln_gamma`] for any [`Real`], evaluated in double precision.
#[inline]
pub fn ln_gamma_real<T: Real>(x: T) -> T {
    T::from_f64(ln_gamma(x.to_f64().unwrap_or(f64::NAN))).unwrap_or_else(T::nan)
}

#[inline]
pub fn ln_factorial(n: u64) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// ln Γ(x + k) − ln Γ(x), the log of the rising factorial.
#[inline]
pub fn ln_rising(x: f64, k: u64) -> f64 {
    if k == 0 {
        0.0
    } else {
        ln_gamma(x + k as f64) - ln_gamma(x)
    }
}

/// ln B(a) for a Dirichlet parameter vector.
pub fn ln_multivariate_beta(a: &[f64]) -> f64 {
    let total: f64 = a.iter().sum();
    a.iter().map(|&v| ln_gamma(v)).sum::<f64>() - ln_gamma(total)
}

/// Digamma ψ(x) for x > 0: upward recurrence to x ≥ 10, then the asymptotic series.
pub fn digamma(mut x: f64) -> f64 {
    if x.is_nan() || x <= 0.0 {
        return f64::NAN;
    }
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Bernoulli terms B_{2k} / (2k)
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * 691.0 / 32760.0)))));
    acc + x.ln() - 0.5 * inv - series
}

/// log Σ exp(v) without overflow. Returns −∞ for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Pairwise (cascade) summation. Order-fixed, so the result depends only on the slice.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}
