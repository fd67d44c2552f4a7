//! Monte Carlo risk of point estimators and predictive masses, and the two
//! simulation studies built on them.
//!
//! Replication `k` of an experiment always draws from stream
//! `experiment_id ⊕ k` of the configured seed, and per-replication values are
//! collected in replication order and reduced by pairwise summation, so results
//! do not depend on the number of worker threads.

mod experiments;
mod output;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use experiments::{
    fig1_config, run_fig1, run_point_experiment, run_pred_experiment, run_table1, table1_config, GridPoint,
    PointCase, PointExperimentConfig, PredCase, PredExperimentConfig, ExperimentOutput, SCHEMA,
};
pub use output::{write_csv, write_svg, RiskRow};

use crate::error::{Error, Result};
use crate::estimators::{eb_affine, loss_std_sq, shrinkage_estimate, umvu, EbAffineSpec, Estimate, LossWeights, ShrinkageSchedule};
use crate::model::{sample_counts, table_log_pmf, table_sample, CountData, ModelSpec, ProbParam, TableCounts, TableModel};
use crate::predictive::{
    batch_means, log_pred_mass_dirichlet, DirichletPriorSpec, McEstimate, ShrinkageMass,
};
use crate::rng::RngSpec;

/// Point estimators available to the harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PointEstimator {
    Umvu,
    Shrinkage { schedule: ShrinkageSchedule },
    EbAffine { weights: EbAffineSpec },
    /// Returns the true parameter; its risk is zero.
    Truth,
}

impl PointEstimator {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Umvu => "UMVU",
            Self::Shrinkage { schedule: ShrinkageSchedule::EbMl { .. } } => "EB",
            Self::Shrinkage { schedule: ShrinkageSchedule::EbMoment { .. } } => "EB-moment",
            Self::Shrinkage { .. } => "shrinkage",
            Self::EbAffine { .. } => "EB-affine",
            Self::Truth => "truth",
        }
    }

    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        match self {
            Self::Shrinkage { schedule } => schedule.validate(spec),
            Self::EbAffine { weights } => weights.validate(spec),
            Self::Umvu | Self::Truth => Ok(()),
        }
    }

    pub fn estimate(&self, x: &CountData, spec: &ModelSpec, p: &ProbParam) -> Estimate {
        match self {
            Self::Umvu => umvu(x, spec),
            Self::Shrinkage { schedule } => shrinkage_estimate(x, spec, schedule),
            Self::EbAffine { weights } => eb_affine(x, spec, weights),
            Self::Truth => p.p.clone(),
        }
    }
}

/// Risk under the standardized squared error loss of several estimators from
/// the same draws of X.
pub fn point_risks(
    estimators: &[PointEstimator],
    p: &ProbParam,
    spec: &ModelSpec,
    w: &LossWeights,
    reps: usize,
    rng: RngSpec,
) -> Result<Vec<McEstimate>> {
    spec.validate()?;
    p.check_against(spec)?;
    w.check_against(spec)?;
    for e in estimators {
        e.validate(spec)?;
    }
    if reps == 0 {
        return Err(Error::domain("reps must be at least 1"));
    }
    let losses: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|k| -> Result<Vec<f64>> {
            let mut g = RngSpec::for_replication(rng.seed, rng.stream, k as u64).rng();
            let x = sample_counts(&mut g, spec, p)?;
            Ok(estimators.iter().map(|e| loss_std_sq(&e.estimate(&x, spec, p), p, w)).collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..estimators.len())
        .map(|j| batch_means(&losses.iter().map(|row| row[j]).collect::<Vec<_>>()))
        .collect())
}

/// Risk of one estimator; see [`point_risks`].
pub fn point_risk(
    est: &PointEstimator,
    p: &ProbParam,
    spec: &ModelSpec,
    w: &LossWeights,
    reps: usize,
    rng: RngSpec,
) -> Result<McEstimate> {
    Ok(point_risks(std::slice::from_ref(est), p, spec, w, reps, rng)?[0])
}

/// A predictive mass for table outcomes W given X.
#[derive(Clone)]
pub enum PredictiveMethod {
    /// f(w | p) itself; its risk is zero.
    True,
    Dirichlet(DirichletPriorSpec),
    Shrinkage(Arc<ShrinkageMass>),
}

impl PredictiveMethod {
    pub fn label(&self) -> &'static str {
        match self {
            Self::True => "truth",
            Self::Dirichlet(_) => "J",
            Self::Shrinkage(_) => "HB",
        }
    }

    fn log_mass(&self, w: &TableCounts, x: &CountData, spec: &ModelSpec, tm: &TableModel, p: &ProbParam) -> Result<f64> {
        match self {
            Self::True => table_log_pmf(w, tm, p),
            Self::Dirichlet(prior) => log_pred_mass_dirichlet(w, x, spec, tm, prior),
            Self::Shrinkage(mass) => Ok(mass.log_mass(w, x)?.log_mass),
        }
    }
}

/// How the expectation over W is taken within a replication.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerExpectation {
    /// One draw of W per replication.
    Sampled,
    /// Σ_w f(w|p)·log(f/f̂) over the whole finite support; same mean, less variance.
    #[default]
    Exact,
}

/// Per-replication KL losses of several predictive masses from the same draws.
pub fn pred_losses(
    methods: &[PredictiveMethod],
    p: &ProbParam,
    spec: &ModelSpec,
    tm: &TableModel,
    inner: InnerExpectation,
    reps: usize,
    rng: RngSpec,
) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    p.check_against(spec)?;
    tm.check_populations(spec.populations())?;
    if reps == 0 {
        return Err(Error::domain("reps must be at least 1"));
    }
    let support = match inner {
        InnerExpectation::Exact => {
            let s = tm.support(&spec.m);
            let lp: Vec<f64> = s.iter().map(|w| table_log_pmf(w, tm, p)).collect::<Result<_>>()?;
            Some((s, lp))
        }
        InnerExpectation::Sampled => None,
    };
    let rows: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|k| -> Result<Vec<f64>> {
            let mut g = RngSpec::for_replication(rng.seed, rng.stream, k as u64).rng();
            let x = sample_counts(&mut g, spec, p)?;
            match &support {
                Some((ws, lps)) => methods
                    .iter()
                    .map(|m| {
                        let mut terms = Vec::with_capacity(ws.len());
                        for (w, &lp) in ws.iter().zip(lps) {
                            terms.push(lp.exp() * (lp - m.log_mass(w, &x, spec, tm, p)?));
                        }
                        Ok(crate::special::pairwise_sum(&terms))
                    })
                    .collect(),
                None => {
                    let w = table_sample(&mut g, tm, p)?;
                    let lp = table_log_pmf(&w, tm, p)?;
                    methods.iter().map(|m| Ok(lp - m.log_mass(&w, &x, spec, tm, p)?)).collect()
                }
            }
        })
        .collect::<Result<_>>()?;
    Ok((0..methods.len()).map(|j| rows.iter().map(|r| r[j]).collect()).collect())
}

/// KL risk E[log f(W|p) − log f̂(W; X)] of one predictive mass.
pub fn pred_risk_kl(
    method: &PredictiveMethod,
    p: &ProbParam,
    spec: &ModelSpec,
    tm: &TableModel,
    inner: InnerExpectation,
    reps: usize,
    rng: RngSpec,
) -> Result<McEstimate> {
    let losses = pred_losses(std::slice::from_ref(method), p, spec, tm, inner, reps, rng)?;
    Ok(batch_means(&losses[0]))
}

/// 100·(base − improved)/base.
pub fn prial(base: f64, improved: f64) -> Result<f64> {
    if !(base > 0.0 && base.is_finite()) {
        return Err(Error::domain(format!("PRIAL needs a positive base risk, got {base}")));
    }
    Ok(100.0 * (base - improved) / base)
}

/// PRIAL from paired per-replication losses, with a delta-method standard error
/// computed by batch means of the linearized values.
pub fn prial_paired(base: &[f64], improved: &[f64]) -> Result<McEstimate> {
    if base.len() != improved.len() || base.is_empty() {
        return Err(Error::domain("paired losses must have equal nonzero length"));
    }
    let n = base.len() as f64;
    let mb = crate::special::pairwise_sum(base) / n;
    let mi = crate::special::pairwise_sum(improved) / n;
    let value = prial(mb, mi)?;
    let lin: Vec<f64> = base.iter().zip(improved).map(|(b, i)| 100.0 * (b * mi / mb - i) / mb).collect();
    Ok(McEstimate { mean: value, se: batch_means(&lin).se })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{nb_log_pmf, nb_truncation_radius};
    use crate::predictive::ShrinkagePriorSpec;
    use crate::quadrature::QuadratureSpec;

    #[test]
    fn truth_oracle_has_zero_risk() {
        let spec = ModelSpec::new(vec![2], vec![3.0]).unwrap();
        let p = ProbParam::new(vec![vec![0.2, 0.3]]).unwrap();
        let w = LossWeights::ones(&spec, 1).unwrap();
        let r = point_risk(&PointEstimator::Truth, &p, &spec, &w, 100, RngSpec::new(1, 0)).unwrap();
        assert_eq!((r.mean, r.se), (0.0, 0.0));
    }

    #[test]
    fn umvu_risk_matches_exact_sum() {
        let spec = ModelSpec::new(vec![1], vec![3.0]).unwrap();
        let p = ProbParam::new(vec![vec![0.4]]).unwrap();
        let w = LossWeights::ones(&spec, 1).unwrap();
        let mc = point_risk(&PointEstimator::Umvu, &p, &spec, &w, 200_000, RngSpec::new(5, 0)).unwrap();
        let radius = nb_truncation_radius(3.0, 0.4, 1e-14);
        let exact: f64 = (0..=radius)
            .map(|x| {
                let d = x as f64 / (3.0 + x as f64 - 1.0);
                nb_log_pmf(x, 3.0, 0.4).exp() * (d - 0.4).powi(2) / 0.4
            })
            .sum();
        assert!((mc.mean - exact).abs() <= 3.0 * mc.se, "{mc:?} vs {exact}");
    }

    #[test]
    fn prial_values() {
        assert_eq!(prial(0.3, 0.3).unwrap(), 0.0);
        assert!((prial(0.30, 0.27).unwrap() - 10.0).abs() < 1e-12);
        assert!(prial(0.0, 0.1).is_err());
    }

    #[test]
    fn true_density_has_zero_kl_risk() {
        let spec = ModelSpec::new(vec![3, 3], vec![5.0, 5.0]).unwrap();
        let tm = TableModel::new(vec![vec![0], vec![0, 1]], vec![1, 1]).unwrap();
        let p = ProbParam::new(vec![vec![0.25; 3], vec![0.25; 3]]).unwrap();
        for inner in [InnerExpectation::Exact, InnerExpectation::Sampled] {
            let r = pred_risk_kl(&PredictiveMethod::True, &p, &spec, &tm, inner, 50, RngSpec::new(3, 0)).unwrap();
            assert!(r.mean.abs() < 1e-12);
        }
    }

    #[test]
    fn sampled_and_exact_inner_agree() {
        let spec = ModelSpec::new(vec![3, 3], vec![5.0, 5.0]).unwrap();
        let tm = TableModel::new(vec![vec![0], vec![0, 1]], vec![1, 1]).unwrap();
        let p = ProbParam::new(vec![vec![1.0 / 6.0, 1.0 / 6.0, 2.0 / 6.0], vec![2.0 / 6.0, 2.0 / 6.0, 1.0 / 6.0]]).unwrap();
        let jeff = PredictiveMethod::Dirichlet(DirichletPriorSpec::jeffreys(&spec));
        let prior = ShrinkagePriorSpec { alpha: 1.0, beta: 1.0, gamma: vec![1.0, 1.0], base: DirichletPriorSpec::jeffreys(&spec) };
        let hb = PredictiveMethod::Shrinkage(Arc::new(ShrinkageMass::new(&spec, &tm, &prior, QuadratureSpec::default()).unwrap()));
        for m in [jeff, hb] {
            let a = pred_risk_kl(&m, &p, &spec, &tm, InnerExpectation::Exact, 4000, RngSpec::new(9, 0)).unwrap();
            let b = pred_risk_kl(&m, &p, &spec, &tm, InnerExpectation::Sampled, 40_000, RngSpec::new(9, 1)).unwrap();
            assert!(a.mean > 0.0);
            assert!((a.mean - b.mean).abs() <= 3.0 * (a.se.powi(2) + b.se.powi(2)).sqrt(), "{a:?} {b:?}");
        }
    }

    #[test]
    fn paired_prial_se_is_small_for_identical_methods() {
        let base = vec![0.3, 0.2, 0.25, 0.31, 0.22, 0.28, 0.27, 0.24, 0.29];
        let r = prial_paired(&base, &base).unwrap();
        assert_eq!(r.mean, 0.0);
        assert!(r.se.abs() < 1e-12);
    }
}
