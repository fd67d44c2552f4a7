//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use negmn::model::TableModel;
use negmn::predictive::{DirichletPriorSpec, ShrinkagePriorSpec};
use negmn::{ModelSpec, ProbParam, Rational, TableCounts};
use num_bigint::BigInt;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// log f(w | p) from the cell probabilities of each table: every cell of table λ
/// with axis cells (i_1, …, i_d) has probability ∏_h p_{i_h, ν_h}, and the table
/// is multinomial with l^(λ) trials.
pub fn direct_table_log_pmf(w: &TableCounts, tm: &TableModel, p: &ProbParam) -> f64 {
    let cell = |nu: usize, i: usize| if i == 0 { 1.0 - p.p[nu].iter().sum::<f64>() } else { p.p[nu][i - 1] };
    let mut out = 0.0;
    for (lam, counts) in w.w.iter().enumerate() {
        let dims: Vec<usize> = tm.nu[lam].iter().map(|&nu| p.p[nu].len() + 1).collect();
        out += ln_factorial(tm.l[lam]);
        for (flat, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            // Row-major: the last axis varies fastest.
            let mut rest = flat;
            let mut prob = 1.0;
            for h in (0..dims.len()).rev() {
                prob *= cell(tm.nu[lam][h], rest % dims[h]);
                rest /= dims[h];
            }
            out += c as f64 * prob.ln() - ln_factorial(c);
        }
    }
    out
}

/// Tables over random subsets of the populations, every population covered.
pub fn random_table_model(rng: &mut ChaCha8Rng, n_pop: usize, max_trials: u64) -> TableModel {
    let mut nu = Vec::new();
    let mut l = Vec::new();
    let tables = rng.random_range(1..=3usize);
    let mut covered = vec![false; n_pop];
    for _ in 0..tables {
        let d = rng.random_range(1..=n_pop.min(2));
        let mut pops: Vec<usize> = (0..n_pop).collect();
        pops.shuffle(rng);
        pops.truncate(d);
        pops.sort_unstable();
        for &v in &pops {
            covered[v] = true;
        }
        nu.push(pops);
        l.push(rng.random_range(1..=max_trials));
    }
    for (v, seen) in covered.into_iter().enumerate() {
        if !seen {
            nu.push(vec![v]);
            l.push(1);
        }
    }
    TableModel::new(nu, l).unwrap()
}

/// Cell probabilities with p_{·,ν} drawn uniformly from [lo, hi].
pub fn random_prob(rng: &mut ChaCha8Rng, m: &[usize], lo: f64, hi: f64) -> ProbParam {
    let p = m
        .iter()
        .map(|&mv| {
            let dot = rng.random_range(lo..hi);
            let raw: Vec<f64> = (0..mv).map(|_| rng.random_range(0.2..1.0)).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|v| dot * v / s).collect()
        })
        .collect();
    ProbParam::new(p).unwrap()
}

pub fn jeffreys(m: &[usize]) -> DirichletPriorSpec {
    DirichletPriorSpec {
        a0: m.iter().map(|&mv| (1.0 - mv as f64) / 2.0).collect(),
        a: m.iter().map(|&mv| vec![0.5; mv]).collect(),
    }
}

pub fn rat(v: f64) -> Rational {
    Rational::from_float(v).unwrap()
}

pub fn rat_int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

/// Whether ((α+1)γ/(β+γ) − a_·)(r − 1) ≤ x·(−(α+1)γ/(β+γ) − Σ_{λ∋ν} l − a₀) for every
/// population and every x in 1..=x_max, checked one x at a time.
pub fn multin_scan(spec: &ModelSpec, tm: &TableModel, prior: &ShrinkagePriorSpec, x_max: u64) -> bool {
    let one = rat_int(1);
    for nu in 0..spec.populations() {
        let shift = (rat(prior.alpha) + one.clone()) * rat(prior.gamma[nu]) / (rat(prior.beta) + rat(prior.gamma[nu]));
        let a_dot = prior.base.a[nu].iter().fold(rat_int(0), |s, &v| s + rat(v));
        let trials: u64 = tm.nu.iter().zip(&tm.l).filter(|(pops, _)| pops.contains(&nu)).map(|(_, &l)| l).sum();
        let lhs = (shift.clone() - a_dot) * (rat(spec.r[nu]) - one.clone());
        let slope = -shift - rat_int(trials as i64) - rat(prior.base.a0[nu]);
        for x in 1..=x_max {
            if lhs > rat_int(x as i64) * slope.clone() {
                return false;
            }
        }
    }
    true
}

/// inf over x ≥ 2 of min_ν δ_ν(x) / max_ν δ_ν(x) for δ_ν(x) = m_ν + (ã_ν/x) Σ m r/ã,
/// scanning x = 2..=x_max and adding the x → ∞ value min m / max m.
pub fn rho_scan(a_tilde: &[Rational], spec: &ModelSpec, x_max: u64) -> Rational {
    let n = spec.populations();
    let m: Vec<Rational> = spec.m.iter().map(|&v| rat_int(v as i64)).collect();
    let total = (0..n).fold(rat_int(0), |s, k| s + m[k].clone() * rat(spec.r[k]) / a_tilde[k].clone());
    let min_of = |v: &[Rational]| v.iter().cloned().reduce(|a, b| if b < a { b } else { a }).unwrap();
    let max_of = |v: &[Rational]| v.iter().cloned().reduce(|a, b| if b > a { b } else { a }).unwrap();
    let mut best = min_of(&m) / max_of(&m);
    for x in 2..=x_max {
        let xr = rat_int(x as i64);
        let d: Vec<Rational> = (0..n).map(|k| m[k].clone() + a_tilde[k].clone() * total.clone() / xr.clone()).collect();
        let ratio = min_of(&d) / max_of(&d);
        if ratio < best {
            best = ratio;
        }
    }
    best
}

/// Dirichlet-negative-multinomial predictive mass of table outcomes, written out
/// with moments of the Dirichlet posterior Dir(r + a₀, x + a).
pub fn dirichlet_pred_log_mass(w: &TableCounts, x: &[Vec<u64>], spec: &ModelSpec, tm: &TableModel, prior: &DirichletPriorSpec) -> f64 {
    let lg = |v: f64| libm::lgamma(v);
    let n = spec.populations();
    let mut s: Vec<Vec<u64>> = spec.m.iter().map(|&mv| vec![0; mv + 1]).collect();
    let mut out = 0.0;
    for (lam, counts) in w.w.iter().enumerate() {
        let dims: Vec<usize> = tm.nu[lam].iter().map(|&nu| spec.m[nu] + 1).collect();
        out += ln_factorial(tm.l[lam]);
        for (flat, &c) in counts.iter().enumerate() {
            out -= ln_factorial(c);
            let mut rest = flat;
            for h in (0..dims.len()).rev() {
                s[tm.nu[lam][h]][rest % dims[h]] += c;
                rest /= dims[h];
            }
        }
    }
    for nu in 0..n {
        let mut alpha = vec![spec.r[nu] + prior.a0[nu]];
        alpha.extend(x[nu].iter().zip(&prior.a[nu]).map(|(&xi, &a)| xi as f64 + a));
        let big: f64 = alpha.iter().sum();
        let tot: u64 = s[nu].iter().sum();
        out += lg(big) - lg(big + tot as f64);
        for (a, &si) in alpha.iter().zip(&s[nu]) {
            out += lg(a + si as f64) - lg(*a);
        }
    }
    out
}
