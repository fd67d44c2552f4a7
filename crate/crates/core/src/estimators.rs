//! Point estimators of p and the standardized squared error loss.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CountData, ModelSpec, ProbParam};
use crate::scalar::{Field, Real};

/// Ragged array of estimates shaped like `ProbParam::p`.
pub type Estimate<T = f64> = Vec<Vec<T>>;

/// Loss weights c_{i,ν} and the number n of populations entering the loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossWeights<T = f64> {
    pub c: Vec<Vec<T>>,
    pub n: usize,
}

impl<T: Field> LossWeights<T> {
    pub fn new(c: Vec<Vec<T>>, n: usize) -> Result<Self> {
        let w = Self { c, n };
        if w.n == 0 || w.n > w.c.len() {
            return Err(Error::domain(format!("n = {} must lie in 1..={}", w.n, w.c.len())));
        }
        for (nu, row) in w.c.iter().enumerate() {
            if let Some(i) = row.iter().position(|v| v.is_negative()) {
                return Err(Error::domain(format!("c[{nu}][{i}] is negative")));
            }
        }
        Ok(w)
    }

    /// c_{i,ν} = 1 on every cell of the first n populations.
    pub fn ones(spec: &ModelSpec, n: usize) -> Result<Self> {
        Self::new(spec.m.iter().map(|&m| vec![T::one(); m]).collect(), n)
    }

    pub fn check_against(&self, spec: &ModelSpec) -> Result<()> {
        if self.c.len() != spec.populations() {
            return Err(Error::domain(format!("weights cover {} populations, model has {}", self.c.len(), spec.populations())));
        }
        for (nu, (row, &m)) in self.c.iter().zip(&spec.m).enumerate() {
            if row.len() != m {
                return Err(Error::domain(format!("c[{nu}] has {} cells, expected {m}", row.len())));
            }
        }
        Ok(())
    }

    /// c_{·,ν}
    pub fn c_dot(&self, nu: usize) -> T {
        self.c[nu].iter().fold(T::zero(), |a, b| a + b.clone())
    }

    /// c̄_ν = max_i c_{i,ν}
    pub fn c_bar(&self, nu: usize) -> T {
        self.c[nu].iter().cloned().fold(T::zero(), T::max_of)
    }

    /// min_{ν<n} c_{·,ν}
    pub fn c_dot_min(&self) -> T {
        (1..self.n).fold(self.c_dot(0), |a, nu| T::min_of(a, self.c_dot(nu)))
    }

    /// max_{ν<n, i} c_{i,ν}
    pub fn c_max(&self) -> T {
        (0..self.n).fold(T::zero(), |a, nu| T::max_of(a, self.c_bar(nu)))
    }
}

/// The inflation δ_ν(x) added to the UMVU denominator, as a function of the grand
/// total x = X_{·,·}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShrinkageSchedule<T = f64> {
    /// δ_ν(x) = m_ν + (ã_ν/x) Σ_ν' m_ν' r_ν'/ã_ν' for x ≥ 1, δ₀ at x = 0.
    EbMl { a_tilde: Vec<T>, delta0: T },
    /// δ_ν(x) = 1 + Σ_ν' m_ν' r_ν'/x for x ≥ 1, δ₀ at x = 0.
    EbMoment { delta0: T },
    /// `values[ν][x]` for tabulated x, `limit[ν]` beyond the table and as x → ∞.
    Tabulated { values: Vec<Vec<T>>, limit: Vec<T> },
}

impl<T: Field> ShrinkageSchedule<T> {
    pub fn eb_ml(a_tilde: Vec<T>) -> Self {
        Self::EbMl { a_tilde, delta0: T::one() }
    }

    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        let n = spec.populations();
        match self {
            Self::EbMl { a_tilde, delta0 } => {
                if a_tilde.len() != n {
                    return Err(Error::domain(format!("a_tilde has {} entries, expected {n}", a_tilde.len())));
                }
                if let Some(nu) = a_tilde.iter().position(|a| !a.is_positive()) {
                    return Err(Error::domain(format!("a_tilde[{nu}] must be positive")));
                }
                if !delta0.is_positive() {
                    return Err(Error::domain("delta0 must be positive"));
                }
            }
            Self::EbMoment { delta0 } => {
                if !delta0.is_positive() {
                    return Err(Error::domain("delta0 must be positive"));
                }
            }
            Self::Tabulated { values, limit } => {
                if values.len() != n || limit.len() != n {
                    return Err(Error::domain(format!("tabulated schedule must cover {n} populations")));
                }
                for (nu, row) in values.iter().enumerate() {
                    if row.iter().chain(std::iter::once(&limit[nu])).any(|v| !v.is_positive()) {
                        return Err(Error::domain(format!("delta values for population {nu} must be positive")));
                    }
                }
            }
        }
        Ok(())
    }

    /// δ_ν(x)
    pub fn delta(&self, nu: usize, x: u64, spec: &ModelSpec) -> T {
        match self {
            Self::EbMl { a_tilde, delta0 } => {
                if x == 0 {
                    return delta0.clone();
                }
                let sum = (0..spec.populations()).fold(T::zero(), |acc, k| {
                    acc + T::from_count(spec.m[k] as u64) * T::lit(spec.r[k]) / a_tilde[k].clone()
                });
                T::from_count(spec.m[nu] as u64) + a_tilde[nu].clone() * sum / T::from_count(x)
            }
            Self::EbMoment { delta0 } => {
                if x == 0 {
                    return delta0.clone();
                }
                T::one() + moment_sum::<T>(spec) / T::from_count(x)
            }
            Self::Tabulated { values, limit } => {
                values[nu].get(x as usize).cloned().unwrap_or_else(|| limit[nu].clone())
            }
        }
    }

    /// lim_{x→∞} δ_ν(x)
    pub fn limit(&self, nu: usize, spec: &ModelSpec) -> T {
        match self {
            Self::EbMl { .. } => T::from_count(spec.m[nu] as u64),
            Self::EbMoment { .. } => T::one(),
            Self::Tabulated { limit, .. } => limit[nu].clone(),
        }
    }

    /// δ̲(x) = min_{ν<n} δ_ν(x)
    pub fn delta_min(&self, x: u64, spec: &ModelSpec, n: usize) -> T {
        (1..n).fold(self.delta(0, x, spec), |a, nu| T::min_of(a, self.delta(nu, x, spec)))
    }

    /// δ̄(x) = max_{ν<n} δ_ν(x)
    pub fn delta_max(&self, x: u64, spec: &ModelSpec, n: usize) -> T {
        (1..n).fold(self.delta(0, x, spec), |a, nu| T::max_of(a, self.delta(nu, x, spec)))
    }

    pub fn limit_max(&self, spec: &ModelSpec, n: usize) -> T {
        (1..n).fold(self.limit(0, spec), |a, nu| T::max_of(a, self.limit(nu, spec)))
    }

    pub fn limit_min(&self, spec: &ModelSpec, n: usize) -> T {
        (1..n).fold(self.limit(0, spec), |a, nu| T::min_of(a, self.limit(nu, spec)))
    }

    /// First x in 0..x_max at which x δ_ν(x) ≤ (x+1) δ_ν(x+1) fails for some ν.
    pub fn monotone_violation(&self, spec: &ModelSpec, x_max: u64) -> Option<(u64, usize)> {
        for x in 0..x_max {
            for nu in 0..spec.populations() {
                let lhs = T::from_count(x) * self.delta(nu, x, spec);
                let rhs = T::from_count(x + 1) * self.delta(nu, x + 1, spec);
                if lhs > rhs {
                    return Some((x, nu));
                }
            }
        }
        None
    }
}

fn moment_sum<T: Field>(spec: &ModelSpec) -> T {
    (0..spec.populations()).fold(T::zero(), |acc, k| acc + T::from_count(spec.m[k] as u64) * T::lit(spec.r[k]))
}

/// UMVU estimate X_{i,ν}/(r_ν + X_{·,ν} − 1), with 0/0 = 0.
pub fn umvu<T: Real>(x: &CountData, spec: &ModelSpec) -> Estimate<T> {
    scaled(x, spec, |_| T::zero())
}

/// X_{i,ν}/(r_ν + X_{·,ν} − 1 + δ_ν(X_{·,·})).
pub fn shrinkage_estimate<T: Real>(x: &CountData, spec: &ModelSpec, delta: &ShrinkageSchedule<T>) -> Estimate<T> {
    let total = x.total();
    scaled(x, spec, |nu| delta.delta(nu, total, spec))
}

/// Empirical Bayes estimate from the marginal maximum likelihood schedule.
pub fn eb_ml<T: Real>(x: &CountData, spec: &ModelSpec, a_tilde: &[T], delta0: T) -> Estimate<T> {
    shrinkage_estimate(x, spec, &ShrinkageSchedule::EbMl { a_tilde: a_tilde.to_vec(), delta0 })
}

fn scaled<T: Real>(x: &CountData, spec: &ModelSpec, extra: impl Fn(usize) -> T) -> Estimate<T> {
    x.x.iter()
        .enumerate()
        .map(|(nu, row)| {
            let row_sum = x.row_sum(nu);
            if row_sum == 0 {
                return vec![T::zero(); row.len()];
            }
            let denom = T::lit(spec.r[nu]) + T::from_count(row_sum) - T::one() + extra(nu);
            row.iter().map(|&xi| T::from_count(xi) / denom).collect()
        })
        .collect()
}

/// Where the infimum defining ρ is attained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoSource {
    ClosedForm,
    Scan { x: u64 },
    Limit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rho<T> {
    pub value: T,
    pub source: RhoSource,
}

/// ρ = inf_{x≥2} δ̲(x)/δ̄(x) for the EB-ML schedule with weights ã.
///
/// When ã is constant or proportional to (m_ν) the infimum is min m / max m over
/// ν < n. Otherwise x = 2..=x_max is scanned and compared with the x → ∞ limit.
pub fn eb_rho<T: Field>(a_tilde: &[T], spec: &ModelSpec, n: usize, x_max: u64) -> Result<Rho<T>> {
    if n == 0 || n > spec.populations() {
        return Err(Error::domain(format!("n = {n} must lie in 1..={}", spec.populations())));
    }
    let schedule = ShrinkageSchedule::EbMl { a_tilde: a_tilde.to_vec(), delta0: T::one() };
    schedule.validate(spec)?;
    let m: Vec<T> = spec.m.iter().map(|&v| T::from_count(v as u64)).collect();
    let limit = schedule.limit_min(spec, n) / schedule.limit_max(spec, n);
    let constant = a_tilde.iter().all(|a| *a == a_tilde[0]);
    let proportional = (1..a_tilde.len())
        .all(|k| a_tilde[k].clone() * m[0].clone() == a_tilde[0].clone() * m[k].clone());
    if constant || proportional {
        return Ok(Rho { value: limit, source: RhoSource::ClosedForm });
    }
    let mut best = Rho { value: limit, source: RhoSource::Limit };
    for x in 2..=x_max {
        let ratio = schedule.delta_min(x, spec, n) / schedule.delta_max(x, spec, n);
        if ratio < best.value {
            best = Rho { value: ratio, source: RhoSource::Scan { x } };
        }
    }
    Ok(best)
}

/// ρ for any schedule: the EB-ML closed forms when they apply, ρ = 1 for the
/// moment schedule (all δ_ν coincide), otherwise a scan of x = 2..=x_max (and of
/// the whole table for tabulated schedules) together with the limit.
pub fn schedule_rho<T: Field>(delta: &ShrinkageSchedule<T>, spec: &ModelSpec, n: usize, x_max: u64) -> Result<Rho<T>> {
    match delta {
        ShrinkageSchedule::EbMl { a_tilde, .. } => eb_rho(a_tilde, spec, n, x_max),
        ShrinkageSchedule::EbMoment { .. } => Ok(Rho { value: T::one(), source: RhoSource::ClosedForm }),
        ShrinkageSchedule::Tabulated { values, .. } => {
            let limit = delta.limit_min(spec, n) / delta.limit_max(spec, n);
            let mut best = Rho { value: limit, source: RhoSource::Limit };
            let table_len = values.iter().map(Vec::len).max().unwrap_or(0) as u64;
            for x in 2..=x_max.max(table_len) {
                let ratio = delta.delta_min(x, spec, n) / delta.delta_max(x, spec, n);
                if ratio < best.value {
                    best = Rho { value: ratio, source: RhoSource::Scan { x } };
                }
            }
            Ok(best)
        }
    }
}

/// Weights of the affine empirical Bayes estimator: `b[ν]` = b̃_ν and
/// `cmat[ν][ν'][i]` = c̃^{(ν)}_{i,ν'}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EbAffineSpec<T = f64> {
    pub b: Vec<T>,
    pub cmat: Vec<Vec<Vec<T>>>,
}

impl<T: Field> EbAffineSpec<T> {
    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        let n = spec.populations();
        if self.b.len() != n || self.cmat.len() != n {
            return Err(Error::domain(format!("affine weights must cover {n} populations")));
        }
        if let Some(nu) = self.b.iter().position(|v| !v.is_positive()) {
            return Err(Error::domain(format!("b[{nu}] must be positive")));
        }
        for (nu, block) in self.cmat.iter().enumerate() {
            if block.len() != n {
                return Err(Error::domain(format!("cmat[{nu}] must have {n} rows")));
            }
            for (k, row) in block.iter().enumerate() {
                if row.len() != spec.m[k] {
                    return Err(Error::domain(format!("cmat[{nu}][{k}] must have {} entries", spec.m[k])));
                }
                if row.iter().any(|v| !v.is_positive()) {
                    return Err(Error::domain(format!("cmat[{nu}][{k}] entries must be positive")));
                }
            }
        }
        Ok(())
    }

    /// Method-of-moments member: b̃ = 1 and c̃ ≡ 1/Σ m_ν r_ν, so the denominator
    /// gains 1 + Σ m_ν r_ν / X_{·,·}.
    pub fn moment(spec: &ModelSpec) -> Self {
        let weight = T::one() / moment_sum::<T>(spec);
        Self {
            b: vec![T::one(); spec.populations()],
            cmat: (0..spec.populations())
                .map(|_| spec.m.iter().map(|&m| vec![weight.clone(); m]).collect())
                .collect(),
        }
    }

    /// Uniform weights c̃^{(ν)} ≡ c̃ for every ν.
    pub fn uniform(spec: &ModelSpec, b: Vec<T>, c: T) -> Self {
        Self {
            b,
            cmat: (0..spec.populations())
                .map(|_| spec.m.iter().map(|&m| vec![c.clone(); m]).collect())
                .collect(),
        }
    }

    /// X̃^{(c̃^{(ν)})} = Σ_{ν',i} c̃^{(ν)}_{i,ν'} X_{i,ν'}
    pub fn weighted_total(&self, nu: usize, x: &CountData) -> T {
        let mut acc = T::zero();
        for (row_c, row_x) in self.cmat[nu].iter().zip(&x.x) {
            for (c, &xi) in row_c.iter().zip(row_x) {
                if xi > 0 {
                    acc = acc + c.clone() * T::from_count(xi);
                }
            }
        }
        acc
    }
}

/// X_{i,ν}/(r_ν + X_{·,ν} − 1 + b̃_ν + 1/X̃^{(c̃^{(ν)})}); zero when X̃ = 0 or the
/// row is empty.
pub fn eb_affine<T: Real>(x: &CountData, spec: &ModelSpec, eb: &EbAffineSpec<T>) -> Estimate<T> {
    x.x.iter()
        .enumerate()
        .map(|(nu, row)| {
            let row_sum = x.row_sum(nu);
            let xt = eb.weighted_total(nu, x);
            if row_sum == 0 || xt == T::zero() {
                return vec![T::zero(); row.len()];
            }
            let denom = T::lit(spec.r[nu]) + T::from_count(row_sum) - T::one() + eb.b[nu] + T::one() / xt;
            row.iter().map(|&xi| T::from_count(xi) / denom).collect()
        })
        .collect()
}

/// Σ_{ν<n} Σ_i c_{i,ν}(d_{i,ν} − p_{i,ν})²/p_{i,ν}
pub fn loss_std_sq<T: Real>(d: &[Vec<T>], p: &ProbParam<T>, w: &LossWeights<T>) -> T {
    let mut out = T::zero();
    for nu in 0..w.n {
        for ((&di, &pi), &ci) in d[nu].iter().zip(&p.p[nu]).zip(&w.c[nu]) {
            if ci != T::zero() {
                let e = di - pi;
                out = out + ci * e * e / pi;
            }
        }
    }
    out
}

/// Componentwise check that `d` lies in [0, reference].
pub fn within_umvu<T: Real>(d: &[Vec<T>], reference: &[Vec<T>]) -> bool {
    d.iter().zip(reference).all(|(a, b)| {
        a.iter()
            .zip(b)
            .all(|(&ai, &bi)| ai >= T::zero() && ai <= bi + Float::abs(bi) * T::epsilon())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec77() -> ModelSpec {
        ModelSpec::new(vec![7, 7], vec![12.0, 12.0]).unwrap()
    }

    #[test]
    fn umvu_zero_row_with_unit_shape() {
        let spec = ModelSpec::new(vec![2], vec![1.0]).unwrap();
        let d: Estimate<f64> = umvu(&CountData::new(vec![vec![0, 0]]), &spec);
        assert_eq!(d, vec![vec![0.0, 0.0]]);
    }

    #[test]
    fn umvu_direct_formula() {
        let spec = ModelSpec::new(vec![2], vec![2.0]).unwrap();
        let d: Estimate<f64> = umvu(&CountData::new(vec![vec![2, 3]]), &spec);
        assert_eq!(d, vec![vec![2.0 / 6.0, 3.0 / 6.0]]);
    }

    #[test]
    fn eb_ml_schedule_balanced_case() {
        let spec = spec77();
        let s = ShrinkageSchedule::eb_ml(vec![1.0, 1.0]);
        for x in 1..50u64 {
            let expected = 7.0 + 7.0 * 24.0 / x as f64;
            assert!((s.delta(0, x, &spec) - expected).abs() < 1e-12);
        }
        assert!(s.monotone_violation(&spec, 10_000).is_none());
    }

    #[test]
    fn large_delta_shrinks_to_zero() {
        let spec = ModelSpec::new(vec![2], vec![3.0]).unwrap();
        let s = ShrinkageSchedule::Tabulated { values: vec![vec![]], limit: vec![1e300] };
        let d = shrinkage_estimate(&CountData::new(vec![vec![4, 5]]), &spec, &s);
        assert!(d[0].iter().all(|&v| v < 1e-290));
    }

    #[test]
    fn rho_closed_forms() {
        let spec = ModelSpec::new(vec![3, 7], vec![1.0, 1.0]).unwrap();
        let r = eb_rho(&[3.0, 7.0], &spec, 2, 100).unwrap();
        assert_eq!(r.value, 3.0 / 7.0);
        assert_eq!(r.source, RhoSource::ClosedForm);
        let r1 = eb_rho(&[1.0, 1.0], &spec77(), 2, 100).unwrap();
        assert_eq!(r1.value, 1.0);
    }

    #[test]
    fn affine_moment_denominator() {
        let spec = ModelSpec::new(vec![2, 1], vec![2.0, 3.0]).unwrap();
        let x = CountData::new(vec![vec![1, 2], vec![4]]);
        let d = eb_affine(&x, &spec, &EbAffineSpec::<f64>::moment(&spec));
        let extra = 1.0 + (2.0 * 2.0 + 3.0) / 7.0;
        assert!((d[0][0] - 1.0 / (2.0 + 3.0 - 1.0 + extra)).abs() < 1e-14);
        assert!((d[1][0] - 4.0 / (3.0 + 4.0 - 1.0 + extra)).abs() < 1e-14);
    }

    #[test]
    fn loss_single_cell() {
        let p = ProbParam::new(vec![vec![0.1]]).unwrap();
        let w = LossWeights::new(vec![vec![1.0]], 1).unwrap();
        assert!((loss_std_sq(&[vec![0.2]], &p, &w) - 0.1).abs() < 1e-15);
        let zero = LossWeights::new(vec![vec![0.0]], 1).unwrap();
        assert_eq!(loss_std_sq(&[vec![0.2]], &p, &zero), 0.0);
    }

    #[test]
    fn loss_ignores_populations_beyond_n() {
        let p = ProbParam::new(vec![vec![0.1], vec![0.2]]).unwrap();
        let w = LossWeights::new(vec![vec![1.0], vec![1.0]], 1).unwrap();
        assert_eq!(loss_std_sq(&[vec![0.1], vec![0.9]], &p, &w), 0.0);
    }

    #[test]
    fn f32_estimates() {
        let spec = spec77();
        let x = CountData::new(vec![vec![1, 0, 2, 0, 0, 1, 0], vec![0; 7]]);
        let d32 = eb_ml(&x, &spec, &[1.0f32, 1.0], 1.0);
        let d64 = eb_ml(&x, &spec, &[1.0f64, 1.0], 1.0);
        assert!((d32[0][2] as f64 - d64[0][2]).abs() < 1e-6);
    }
}
