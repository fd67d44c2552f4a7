use super::{DominanceVerdict, TailVerdict, VerdictBuilder};
use crate::error::{Error, Result};
use crate::estimators::{EbAffineSpec, LossWeights};
use crate::model::ModelSpec;
use crate::scalar::Field;

/// Derived constants shared by the two affine conditions. Item (d) is evaluated
/// at E(x) = b̄ + 1/(slope·x + offset) with the penalty constant `a` and the
/// weight ratio `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineConstants<T> {
    /// A (general weights) or A₁ (uniform weights).
    pub a: T,
    /// Index ν attaining `a`.
    pub a_argmax: usize,
    pub q: T,
    pub b_low: T,
    pub b_high: T,
    pub slope: T,
    pub offset: T,
    /// Lower bounds on r_ν from item (b): (r_ν ≥ ·, r_ν + b̃_ν ≥ ·).
    pub r_bounds: Vec<(T, T)>,
    pub b: Vec<T>,
}

impl<T: Field> AffineConstants<T> {
    /// Constants for general affine weights c̃^{(ν)}.
    pub fn general(spec: &ModelSpec, w: &LossWeights<T>, eb: &EbAffineSpec<T>) -> Result<Self> {
        eb.validate(spec)?;
        let n = w.n;
        let own_min = |nu: usize| eb.cmat[nu][nu].iter().cloned().reduce(T::min_of).expect("m ≥ 1");
        let own_max = |nu: usize| eb.cmat[nu][nu].iter().cloned().reduce(T::max_of).expect("m ≥ 1");
        let c_tilde: Vec<T> = (0..spec.populations())
            .map(|nu| {
                let (lo, hi) = (own_min(nu), own_max(nu));
                (hi.clone() / lo.clone()) / (T::one() + eb.b[nu].clone() * (lo + hi))
            })
            .collect();
        let (a, a_argmax) = argmax((0..n).map(|nu| w.c_bar(nu) * (c_tilde[nu].clone() + T::lit(2.0))));
        let all = eb.cmat.iter().flatten().flatten().cloned();
        let c_star_low = all.clone().reduce(T::min_of).expect("nonempty");
        let c_star_high = all.reduce(T::max_of).expect("nonempty");
        let own_max_low = (0..n).map(own_max).reduce(T::min_of).expect("n ≥ 1");
        let own_max_high = (0..n).map(own_max).reduce(T::max_of).expect("n ≥ 1");
        let b_low = eb.b[..n].iter().cloned().reduce(T::min_of).expect("n ≥ 1");
        let b_high = eb.b[..n].iter().cloned().reduce(T::max_of).expect("n ≥ 1");
        let q = b_low.clone() * c_star_low.clone() * own_max_low.clone()
            / (b_high.clone() * c_star_high * own_max_high);
        let r_bounds = c_tilde
            .iter()
            .map(|c| (c.clone() + T::one(), c.clone() + T::lit(2.0)))
            .collect();
        Ok(Self { a, a_argmax, q, b_low, b_high, slope: c_star_low, offset: own_max_low, r_bounds, b: eb.b.clone() })
    }

    /// Constants for uniform weights c̃^{(ν)} ≡ c̃.
    pub fn uniform(spec: &ModelSpec, w: &LossWeights<T>, b: &[T], c: &T) -> Result<Self> {
        if b.len() != spec.populations() {
            return Err(Error::domain(format!("b must have {} entries", spec.populations())));
        }
        if let Some(nu) = b.iter().position(|v| !v.is_positive()) {
            return Err(Error::domain(format!("b[{nu}] must be positive")));
        }
        if !c.is_positive() {
            return Err(Error::domain("c must be positive"));
        }
        let n = w.n;
        let two = T::lit(2.0);
        let damp: Vec<T> = b.iter().map(|bv| T::one() + two.clone() * bv.clone() * c.clone()).collect();
        let (a, a_argmax) = argmax((0..n).map(|nu| {
            w.c_bar(nu) * (T::lit(3.0) + T::lit(4.0) * b[nu].clone() * c.clone()) / damp[nu].clone()
        }));
        let b_low = b[..n].iter().cloned().reduce(T::min_of).expect("n ≥ 1");
        let b_high = b[..n].iter().cloned().reduce(T::max_of).expect("n ≥ 1");
        let r_bounds = damp
            .iter()
            .map(|dv| {
                let inv = T::one() / dv.clone();
                (inv.clone() + T::one(), inv + two.clone())
            })
            .collect();
        Ok(Self {
            a,
            a_argmax,
            q: b_low.clone() / b_high.clone(),
            b_low,
            b_high,
            slope: c.clone(),
            offset: c.clone(),
            r_bounds,
            b: b.to_vec(),
        })
    }

    /// E(x) = b̄ + 1/(slope·x + offset)
    pub fn e(&self, x: &T) -> T {
        self.b_high.clone() + T::one() / (self.slope.clone() * x.clone() + self.offset.clone())
    }
}

fn argmax<T: Field>(values: impl Iterator<Item = T>) -> (T, usize) {
    let mut best: Option<(T, usize)> = None;
    for (k, v) in values.enumerate() {
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, k));
        }
    }
    best.expect("at least one population")
}

/// Items (a)–(d) of the affine dominance condition with general weights.
pub fn check_assumption1<T: Field>(
    spec: &ModelSpec,
    w: &LossWeights<T>,
    eb: &EbAffineSpec<T>,
    x_max: u64,
) -> Result<DominanceVerdict> {
    check_common(spec, w, x_max, || AffineConstants::general(spec, w, eb))
}

/// Items (a)–(d) of the affine dominance condition when every c̃^{(ν)} ≡ c̃.
pub fn check_assumption2<T: Field>(
    spec: &ModelSpec,
    w: &LossWeights<T>,
    b: &[T],
    c: &T,
    x_max: u64,
) -> Result<DominanceVerdict> {
    check_common(spec, w, x_max, || AffineConstants::uniform(spec, w, b, c))
}

fn check_common<T: Field>(
    spec: &ModelSpec,
    w: &LossWeights<T>,
    x_max: u64,
    consts: impl FnOnce() -> Result<AffineConstants<T>>,
) -> Result<DominanceVerdict> {
    if x_max < 1 {
        return Err(Error::domain("x_max must be at least 1"));
    }
    spec.validate()?;
    w.check_against(spec)?;
    let k = consts()?;
    let n = w.n;
    let mut b = VerdictBuilder::default();
    let r: Vec<T> = spec.r.iter().map(|&v| T::lit(v)).collect();
    let r_low = r[..n].iter().cloned().reduce(T::min_of).expect("n ≥ 1");
    let r_high = r[..n].iter().cloned().reduce(T::max_of).expect("n ≥ 1");
    let r_sum = r[..n].iter().cloned().fold(T::zero(), |a, v| a + v);
    let c_low = w.c_dot_min();
    let c_top = w.c_max();
    let nt = T::from_count(n as u64);
    let two = T::lit(2.0);

    // (a)
    if !c_top.is_positive() {
        b.fail("(a) largest loss weight must be positive");
    }
    // (b)
    for nu in 0..n {
        if !w.c_dot(nu).is_positive() {
            continue;
        }
        let (lo1, lo2) = &k.r_bounds[nu];
        if r[nu] < *lo1 {
            b.fail(format!("(b) r[{nu}] = {} is below {:?}", spec.r[nu], lo1));
        }
        if r[nu].clone() + k.b[nu].clone() < *lo2 {
            b.fail(format!("(b) r[{nu}] + b[{nu}] is below {:?}", lo2));
        }
    }
    // (c)
    if c_low < k.a {
        b.fail(format!(
            "(c) smallest row total {:?} is below the penalty constant {:?} attained at population {}",
            c_low, k.a, k.a_argmax
        ));
    }

    let ratio = r_low.clone() / r_high;
    let k1 = two.clone() * ratio.clone() * ratio * (c_low.clone() - k.a.clone()) * k.q.clone();
    let k2 = two * (c_low.clone() - k.a.clone()) * k.q.clone();
    let g = c_low.clone() - c_top.clone() * r_low.clone();

    let pair1 = |x: &T, e: &T| {
        let slope = c_top.clone() * e.clone() - k1.clone();
        let base = c_low.clone() * e.clone() - k1.clone() * (r_low.clone() + e.clone());
        if slope <= T::zero() {
            base <= T::zero()
        } else {
            x.clone() * slope + nt.clone() * base <= T::zero()
        }
    };
    let pair2 = |x: &T, e: &T| {
        let slope = c_top.clone() * e.clone() - k2.clone();
        if slope <= T::zero() {
            g.clone() - k2.clone() <= T::zero()
        } else {
            (r_sum.clone() + x.clone()) * slope + nt.clone() * g.clone() * e.clone()
                - nt.clone() * k2.clone() * e.clone()
                <= T::zero()
        }
    };
    for x in 1..=x_max {
        let xt = T::from_count(x);
        let e = k.e(&xt);
        if !(pair1(&xt, &e) || pair2(&xt, &e)) {
            b.witness(x);
        }
    }

    // E(x) → b̄ as x → ∞; a positive slope makes the x-term dominate.
    let e_inf = k.b_high.clone();
    let tail1 = match TailVerdict::nonpositive(&(c_top.clone() * e_inf.clone() - k1.clone())) {
        TailVerdict::HoldsInLimit => {
            TailVerdict::nonpositive(&(c_low.clone() * e_inf.clone() - k1.clone() * (r_low.clone() + e_inf.clone())))
        }
        other => other,
    };
    let tail2 = match TailVerdict::nonpositive(&(c_top.clone() * e_inf.clone() - k2.clone())) {
        TailVerdict::HoldsInLimit => TailVerdict::nonpositive(&(g.clone() - k2.clone())),
        other => other,
    };
    Ok(b.finish(x_max, tail1.or(tail2)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_large_c_limit() {
        let spec = ModelSpec::new(vec![3], vec![2.0]).unwrap();
        let w = LossWeights::<f64>::ones(&spec, 1).unwrap();
        let k = AffineConstants::uniform(&spec, &w, &[1.0], &1e12).unwrap();
        assert!((k.r_bounds[0].0 - 1.0).abs() < 1e-9);
        assert!((k.r_bounds[0].1 - 2.0).abs() < 1e-9);
    }

    #[test]
    fn general_with_uniform_weights_matches_uniform_penalty_shape() {
        let spec = ModelSpec::new(vec![4, 4], vec![6.0, 6.0]).unwrap();
        let w = LossWeights::<f64>::ones(&spec, 2).unwrap();
        let eb = EbAffineSpec::uniform(&spec, vec![2.0, 2.0], 0.5);
        let k = AffineConstants::general(&spec, &w, &eb).unwrap();
        // C̃ = 1/(1 + 2·(0.5+0.5)) = 1/3, A = 1·(1/3 + 2)
        assert!((k.a - 7.0 / 3.0).abs() < 1e-14);
        assert!((k.q - 1.0).abs() < 1e-14);
    }

    #[test]
    fn violating_c_names_population() {
        let spec = ModelSpec::new(vec![1, 4], vec![6.0, 6.0]).unwrap();
        let w = LossWeights::ones(&spec, 2).unwrap();
        let v = check_assumption2(&spec, &w, &[1.0, 1.0], &1.0, 20).unwrap();
        assert!(!v.holds);
        assert!(v.failures.iter().any(|f| f.starts_with("(c)")));
    }
}
