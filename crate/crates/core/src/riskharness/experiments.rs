use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::output::RiskRow;
use super::{point_risks, pred_losses, prial_paired, InnerExpectation, PointEstimator, PredictiveMethod};
use crate::error::{Error, Result};
use crate::estimators::{LossWeights, ShrinkageSchedule};
use crate::model::{ModelSpec, ProbParam, TableModel};
use crate::predictive::{batch_means, DirichletPriorSpec, ShrinkageMass, ShrinkagePriorSpec};
use crate::quadrature::QuadratureSpec;
use crate::rng::{experiment_id, RngSpec};

pub const SCHEMA: u32 = 1;

fn check_schema(schema: u32) -> Result<()> {
    if schema != SCHEMA {
        return Err(Error::domain(format!("schema: unsupported version {schema}, expected {SCHEMA}")));
    }
    Ok(())
}

/// One parameter value of a grid, with the label written to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub label: String,
    pub p: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCase {
    pub name: String,
    pub spec: ModelSpec,
    pub grid: Vec<GridPoint>,
}

/// Risk comparison of point estimators over parameter grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointExperimentConfig {
    pub schema: u32,
    pub scenario: String,
    pub cases: Vec<PointCase>,
    pub methods: Vec<PointEstimator>,
    /// Defaults to c ≡ 1 over all populations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<LossWeights>,
    pub reps: usize,
    pub seed: u64,
}

impl PointExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        check_schema(self.schema)?;
        if self.reps == 0 {
            return Err(Error::domain("reps: must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::domain("methods: at least one estimator is required"));
        }
        for (ci, case) in self.cases.iter().enumerate() {
            case.spec.validate().map_err(|e| Error::domain(format!("cases[{ci}].spec: {e}")))?;
            for m in &self.methods {
                m.validate(&case.spec).map_err(|e| Error::domain(format!("methods: {e} (case {})", case.name)))?;
            }
            for (gi, g) in case.grid.iter().enumerate() {
                ProbParam::new(g.p.clone())
                    .and_then(|p| p.check_against(&case.spec))
                    .map_err(|e| Error::domain(format!("cases[{ci}].grid[{gi}].p: {e}")))?;
            }
            if let Some(w) = &self.weights {
                w.check_against(&case.spec).map_err(|e| Error::domain(format!("weights: {e}")))?;
            }
        }
        Ok(())
    }
}

/// The configuration's JSON and the resulting rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub config_json: String,
    pub rows: Vec<RiskRow>,
}

pub fn run_point_experiment(cfg: &PointExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for (ci, case) in cfg.cases.iter().enumerate() {
        let w = match &cfg.weights {
            Some(w) => w.clone(),
            None => LossWeights::ones(&case.spec, case.spec.populations())?,
        };
        for (gi, g) in case.grid.iter().enumerate() {
            let p = ProbParam::new(g.p.clone())?;
            let rng = RngSpec::new(cfg.seed, experiment_id(ci, gi));
            let risks = point_risks(&cfg.methods, &p, &case.spec, &w, cfg.reps, rng)?;
            for (m, r) in cfg.methods.iter().zip(risks) {
                rows.push(RiskRow {
                    scenario: cfg.scenario.clone(),
                    case: case.name.clone(),
                    omega_or_p: g.label.clone(),
                    method: m.label().to_string(),
                    risk: r.mean,
                    se: r.se,
                    reps: cfg.reps,
                    seed: cfg.seed,
                });
            }
        }
    }
    Ok(ExperimentOutput { config_json: serde_json::to_string(cfg).expect("config serializes"), rows })
}

fn mix(a: &[f64], b: &[f64], omega: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (1.0 - omega) * x + omega * y).collect()
}

/// UMVU against the empirical Bayes estimator with ã = (1, 1) for two populations
/// of seven cells, over ω ∈ {0, 1/5, …, 1} in four cases.
pub fn fig1_config(reps: usize, seed: u64) -> PointExperimentConfig {
    let base0 = vec![1.0 / 8.0; 7];
    let base1: Vec<f64> = [1.0, 1.0, 1.0, 1.0, 10.0, 10.0, 10.0].iter().map(|v| v / 44.0).collect();
    let base2: Vec<f64> = [10.0, 10.0, 10.0, 10.0, 1.0, 1.0, 1.0].iter().map(|v| v / 44.0).collect();
    let cases = [("i", [12.0, 12.0], false), ("ii", [12.0, 12.0], true), ("iii", [8.0, 16.0], false), ("iv", [8.0, 16.0], true)];
    PointExperimentConfig {
        schema: SCHEMA,
        scenario: "fig1".into(),
        cases: cases
            .iter()
            .map(|(name, r, split)| PointCase {
                name: (*name).into(),
                spec: ModelSpec { m: vec![7, 7], r: r.to_vec() },
                grid: (0..=5)
                    .map(|k| {
                        let omega = k as f64 / 5.0;
                        let p1 = mix(&base0, &base1, omega);
                        let p2 = if *split { mix(&base0, &base2, omega) } else { p1.clone() };
                        GridPoint { label: format!("{omega}"), p: vec![p1, p2] }
                    })
                    .collect(),
            })
            .collect(),
        methods: vec![
            PointEstimator::Umvu,
            PointEstimator::Shrinkage { schedule: ShrinkageSchedule::eb_ml(vec![1.0, 1.0]) },
        ],
        weights: None,
        reps,
        seed,
    }
}

pub fn run_fig1(reps: usize, seed: u64) -> Result<ExperimentOutput> {
    run_point_experiment(&fig1_config(reps, seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredCase {
    pub name: String,
    pub r: Vec<f64>,
}

/// Comparison of the Dirichlet and shrinkage predictive masses for table outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredExperimentConfig {
    pub schema: u32,
    pub scenario: String,
    pub m: Vec<usize>,
    pub tables: TableModel,
    pub cases: Vec<PredCase>,
    pub grid: Vec<GridPoint>,
    pub dirichlet: DirichletPriorSpec,
    pub shrinkage: ShrinkagePriorSpec,
    pub quadrature: QuadratureSpec,
    pub inner: InnerExpectation,
    pub reps: usize,
    pub seed: u64,
}

impl PredExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        check_schema(self.schema)?;
        if self.reps < 2 {
            return Err(Error::domain("reps: must be at least 2"));
        }
        TableModel::new(self.tables.nu.clone(), self.tables.l.clone())
            .and_then(|tm| tm.check_populations(self.m.len()))
            .map_err(|e| Error::domain(format!("tables: {e}")))?;
        self.quadrature.validate().map_err(|e| Error::domain(format!("quadrature: {e}")))?;
        for (ci, case) in self.cases.iter().enumerate() {
            let spec = ModelSpec::new(self.m.clone(), case.r.clone())
                .map_err(|e| Error::domain(format!("cases[{ci}].r: {e}")))?;
            self.dirichlet.check_proper(&spec).map_err(|e| Error::domain(format!("dirichlet: {e}")))?;
            self.shrinkage.check_proper(&spec).map_err(|e| Error::domain(format!("shrinkage: {e}")))?;
            for (gi, g) in self.grid.iter().enumerate() {
                ProbParam::new(g.p.clone())
                    .and_then(|p| p.check_against(&spec))
                    .map_err(|e| Error::domain(format!("grid[{gi}].p: {e}")))?;
            }
        }
        Ok(())
    }
}

/// Risks of both masses and the PRIAL of the shrinkage mass, per case and grid point.
pub fn run_pred_experiment(cfg: &PredExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let tm = TableModel::new(cfg.tables.nu.clone(), cfg.tables.l.clone())?;
    let mut rows = Vec::new();
    for (ci, case) in cfg.cases.iter().enumerate() {
        let spec = ModelSpec::new(cfg.m.clone(), case.r.clone())?;
        // One cache per case: the cached integrals depend on r.
        let hb = Arc::new(ShrinkageMass::new(&spec, &tm, &cfg.shrinkage, cfg.quadrature)?);
        let methods = [PredictiveMethod::Dirichlet(cfg.dirichlet.clone()), PredictiveMethod::Shrinkage(hb)];
        for (gi, g) in cfg.grid.iter().enumerate() {
            let p = ProbParam::new(g.p.clone())?;
            let rng = RngSpec::new(cfg.seed, experiment_id(ci, gi));
            let losses = pred_losses(&methods, &p, &spec, &tm, cfg.inner, cfg.reps, rng)?;
            let row = |method: &str, risk: f64, se: f64| RiskRow {
                scenario: cfg.scenario.clone(),
                case: case.name.clone(),
                omega_or_p: g.label.clone(),
                method: method.to_string(),
                risk,
                se,
                reps: cfg.reps,
                seed: cfg.seed,
            };
            for (m, l) in methods.iter().zip(&losses) {
                let est = batch_means(l);
                rows.push(row(m.label(), est.mean, est.se));
            }
            let pr = prial_paired(&losses[0], &losses[1])?;
            rows.push(row("PRIAL", pr.mean, pr.se));
        }
    }
    Ok(ExperimentOutput { config_json: serde_json::to_string(cfg).expect("config serializes"), rows })
}

/// Two populations of three cells, a one-way table on population 0 and a two-way
/// table on both, one trial each; Jeffreys prior against the shrinkage prior with
/// α = β = 1 and γ = (1, 1).
pub fn table1_config(reps: usize, seed: u64) -> PredExperimentConfig {
    let m = vec![3, 3];
    let spec_for_prior = ModelSpec { m: m.clone(), r: vec![5.0, 5.0] };
    let jeffreys = DirichletPriorSpec::jeffreys(&spec_for_prior);
    let sixth = |v: [f64; 3]| v.iter().map(|x| x / 6.0).collect::<Vec<_>>();
    PredExperimentConfig {
        schema: SCHEMA,
        scenario: "table1".into(),
        m,
        tables: TableModel { nu: vec![vec![0], vec![0, 1]], l: vec![1, 1] },
        cases: vec![
            PredCase { name: "I".into(), r: vec![5.0, 5.0] },
            PredCase { name: "II".into(), r: vec![4.0, 6.0] },
            PredCase { name: "III".into(), r: vec![6.0, 4.0] },
        ],
        grid: vec![
            GridPoint { label: "p0".into(), p: vec![vec![0.25; 3], vec![0.25; 3]] },
            GridPoint { label: "p1".into(), p: vec![sixth([1.0, 1.0, 2.0]), sixth([1.0, 1.0, 2.0])] },
            GridPoint { label: "p2".into(), p: vec![sixth([1.0, 1.0, 2.0]), sixth([2.0, 2.0, 1.0])] },
        ],
        dirichlet: jeffreys.clone(),
        shrinkage: ShrinkagePriorSpec { alpha: 1.0, beta: 1.0, gamma: vec![1.0, 1.0], base: jeffreys },
        quadrature: QuadratureSpec::default(),
        inner: InnerExpectation::Exact,
        reps,
        seed,
    }
}

pub fn run_table1(reps: usize, seed: u64) -> Result<ExperimentOutput> {
    run_pred_experiment(&table1_config(reps, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig1_grid_shape() {
        let cfg = fig1_config(10, 1);
        assert_eq!(cfg.cases.len(), 4);
        for case in &cfg.cases {
            assert_eq!(case.grid.len(), 6);
            for g in &case.grid {
                for row in &g.p {
                    assert!(row.iter().all(|&v| v > 0.0) && row.iter().sum::<f64>() < 1.0);
                }
            }
        }
        assert_eq!(cfg.cases[2].spec.r, vec![8.0, 16.0]);
        assert_eq!(cfg.cases[1].grid[5].p[1][0], 10.0 / 44.0);
    }

    #[test]
    fn configs_round_trip() {
        let a = fig1_config(100, 7);
        let back: PointExperimentConfig = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(a, back);
        let b = table1_config(100, 7);
        let back: PredExperimentConfig = serde_json::from_str(&serde_json::to_string(&b).unwrap()).unwrap();
        assert_eq!(b, back);
        assert_eq!(b.cases[2].r, vec![6.0, 4.0]);
        assert_eq!(b.dirichlet.a0, vec![-1.0, -1.0]);
    }

    #[test]
    fn unknown_schema_rejected() {
        let mut cfg = fig1_config(10, 1);
        cfg.schema = 2;
        let e = run_point_experiment(&cfg).unwrap_err();
        assert!(e.to_string().contains("schema"));
    }

    #[test]
    fn small_fig1_is_deterministic_across_pools() {
        let mut cfg = fig1_config(300, 11);
        cfg.cases.truncate(1);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| run_point_experiment(&cfg)).unwrap();
        let b = four.install(|| run_point_experiment(&cfg)).unwrap();
        assert_eq!(a, b);
    }
}
