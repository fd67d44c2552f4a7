use serde::{Deserialize, Serialize};

use super::{DominanceVerdict, TailVerdict, VerdictBuilder};
use crate::error::{Error, Result};
use crate::estimators::{LossWeights, ShrinkageSchedule};
use crate::model::ModelSpec;
use crate::scalar::Field;

/// Which pair of inequalities to require at each x; `Either` accepts x when
/// at least one pair holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Thm1Variant {
    I,
    Ii,
    Either,
}

struct Consts<T> {
    n: T,
    r_low: T,
    r_sum: T,
    c_low: T,
    c_top: T,
    k1: T,
    k2: T,
}

impl<T: Field> Consts<T> {
    /// Pair (i) at δ̄(x+1) = `d`.
    fn pair_i(&self, x: &T, d: &T) -> bool {
        let k = &self.k1;
        let lhs = (k.clone() - self.c_low.clone()) * d.clone() + self.r_low.clone() * k.clone();
        if self.c_top.clone() * d.clone() <= *k {
            lhs >= T::zero()
        } else {
            self.n.clone() * lhs >= x.clone() * (self.c_top.clone() * d.clone() - k.clone())
        }
    }

    /// Pair (ii) at δ̄(x+1) = `d`.
    fn pair_ii(&self, x: &T, d: &T) -> bool {
        let k = &self.k2;
        let gap = k.clone() - (self.c_low.clone() - self.r_low.clone() * self.c_top.clone());
        if self.c_top.clone() * d.clone() <= *k {
            gap >= T::zero()
        } else {
            self.n.clone() * gap * d.clone()
                >= (self.r_sum.clone() + x.clone()) * (self.c_top.clone() * d.clone() - k.clone())
        }
    }

    fn tail_i(&self, limit: &T) -> TailVerdict {
        let slope = self.c_top.clone() * limit.clone() - self.k1.clone();
        match TailVerdict::nonpositive(&slope) {
            TailVerdict::HoldsInLimit => TailVerdict::nonnegative(
                &((self.k1.clone() - self.c_low.clone()) * limit.clone() + self.r_low.clone() * self.k1.clone()),
            ),
            // The right side grows linearly in x while the left stays bounded.
            TailVerdict::FailsInLimit => TailVerdict::FailsInLimit,
            TailVerdict::Inconclusive => TailVerdict::Inconclusive,
        }
    }

    fn tail_ii(&self, limit: &T) -> TailVerdict {
        let slope = self.c_top.clone() * limit.clone() - self.k2.clone();
        match TailVerdict::nonpositive(&slope) {
            TailVerdict::HoldsInLimit => TailVerdict::nonnegative(
                &(self.k2.clone() - (self.c_low.clone() - self.r_low.clone() * self.c_top.clone())),
            ),
            TailVerdict::FailsInLimit => TailVerdict::FailsInLimit,
            TailVerdict::Inconclusive => TailVerdict::Inconclusive,
        }
    }
}

/// Checks the sufficient condition for the shrinkage estimator with schedule δ
/// to dominate the UMVU estimator, for x = 1..=x_max and in the limit.
pub fn check_thm1<T: Field>(
    spec: &ModelSpec,
    w: &LossWeights<T>,
    delta: &ShrinkageSchedule<T>,
    variant: Thm1Variant,
    x_max: u64,
) -> Result<DominanceVerdict> {
    if x_max < 1 {
        return Err(Error::domain("x_max must be at least 1"));
    }
    spec.validate()?;
    w.check_against(spec)?;
    delta.validate(spec)?;
    let n = w.n;
    let mut b = VerdictBuilder::default();

    let r: Vec<T> = spec.r.iter().map(|&v| T::lit(v)).collect();
    let r_low = r[..n].iter().cloned().reduce(T::min_of).expect("n ≥ 1");
    let r_high = r[..n].iter().cloned().reduce(T::max_of).expect("n ≥ 1");
    let r_sum = r[..n].iter().cloned().fold(T::zero(), |a, v| a + v);
    let c_low = w.c_dot_min();
    let c_top = w.c_max();
    let three = T::lit(3.0);
    let two = T::lit(2.0);

    let weighted: Vec<usize> = (0..n).filter(|&nu| w.c_dot(nu).is_positive()).collect();
    for &nu in &weighted {
        if r[nu] < T::lit(2.5) {
            b.fail(format!("r[{nu}] = {} is below 5/2", spec.r[nu]));
        }
    }
    if !c_top.is_positive() {
        b.fail("largest loss weight must be positive");
    }
    if three.clone() * c_top.clone() > c_low {
        b.fail(format!(
            "3 × largest weight ({:?}) exceeds smallest row total ({:?})",
            three.clone() * c_top.clone(),
            c_low
        ));
    }
    'mono: for x in 1..=x_max {
        for &nu in &weighted {
            let lhs = T::from_count(x) * delta.delta(nu, x, spec);
            let rhs = T::from_count(x + 1) * delta.delta(nu, x + 1, spec);
            if lhs > rhs {
                b.fail(format!("x·δ(x) decreases at x = {x} for population {nu}"));
                break 'mono;
            }
        }
    }

    let rho = crate::estimators::schedule_rho(delta, spec, n, x_max)?.value;
    let ratio = r_low.clone() / r_high;
    let base = two * (c_low.clone() - three * c_top.clone()) * rho;
    let consts = Consts {
        n: T::from_count(n as u64),
        r_low,
        r_sum,
        c_low,
        c_top,
        k1: ratio.clone() * ratio * base.clone(),
        k2: base,
    };

    for x in 1..=x_max {
        let xt = T::from_count(x);
        let d = delta.delta_max(x + 1, spec, n);
        let ok = match variant {
            Thm1Variant::I => consts.pair_i(&xt, &d),
            Thm1Variant::Ii => consts.pair_ii(&xt, &d),
            Thm1Variant::Either => consts.pair_i(&xt, &d) || consts.pair_ii(&xt, &d),
        };
        if !ok {
            b.witness(x);
        }
    }

    let limit = delta.limit_max(spec, n);
    let tail = match variant {
        Thm1Variant::I => consts.tail_i(&limit),
        Thm1Variant::Ii => consts.tail_ii(&limit),
        Thm1Variant::Either => consts.tail_i(&limit).or(consts.tail_ii(&limit)),
    };
    Ok(b.finish(x_max, tail))
}
