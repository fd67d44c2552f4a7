use std::path::Path;

use negmn::dominance::Thm1Variant;
use negmn::estimators::{EbAffineSpec, LossWeights, ShrinkageSchedule};
use negmn::nmpredict::{FutureSpec, GeneralShrinkagePriorSpec, RhsSettings};
use negmn::predictive::{DirichletPriorSpec, ShrinkagePriorSpec};
use negmn::quadrature::QuadratureSpec;
use negmn::riskharness::SCHEMA;
use negmn::{CountData, ModelSpec, TableCounts, TableModel};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Reads a JSON config, refusing any schema version other than the current one.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("config: cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::validation(format!("config: {e}")))?;
    match value.get("schema").and_then(|v| v.as_u64()) {
        Some(v) if v == SCHEMA as u64 => {}
        Some(v) => return Err(CliError::validation(format!("schema: unsupported version {v}, expected {SCHEMA}"))),
        None => return Err(CliError::validation("schema: missing or not an integer")),
    }
    serde_json::from_value(value).map_err(|e| CliError::validation(format!("config: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Theorem {
    /// Shrinkage schedule against the UMVU estimator.
    Thm1,
    /// Affine empirical Bayes estimator with general weights.
    A1,
    /// Affine empirical Bayes estimator with uniform weights.
    A2,
    /// Predictive shrinkage prior against the Dirichlet prior for table data.
    Multin,
    /// Sufficient condition on r, m and the trial counts alone.
    CorMultin,
}

impl Theorem {
    pub fn name(self) -> &'static str {
        match self {
            Self::Thm1 => "thm1",
            Self::A1 => "a1",
            Self::A2 => "a2",
            Self::Multin => "multin",
            Self::CorMultin => "cor-multin",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformAffine {
    pub b: Vec<f64>,
    pub c: f64,
}

/// Inputs of a dominance check. Only the fields the chosen theorem needs are read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theorem: Option<Theorem>,
    pub spec: ModelSpec,
    /// Evaluate in exact rational arithmetic instead of f64.
    #[serde(default)]
    pub exact: bool,
    #[serde(default = "default_x_max")]
    pub x_max: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<LossWeights>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ShrinkageSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Thm1Variant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affine: Option<EbAffineSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform: Option<UniformAffine>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tables: Option<TableModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<ShrinkagePriorSpec>,
}

fn default_x_max() -> u64 {
    10_000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityKind {
    /// KL risk of one prior against its path-integral form.
    Theorem4,
    /// Risk difference between a mixture prior and a Dirichlet prior.
    Corollary3,
}

/// The mixing measure M of a shrinkage prior, either as explicit atoms or as a
/// discretized gamma weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MixtureConfig {
    Atoms(GeneralShrinkagePriorSpec),
    GammaWeight { alpha: f64, beta: f64, gamma: Vec<f64>, n_atoms: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityConfig {
    pub schema: u32,
    pub identity: IdentityKind,
    pub spec: ModelSpec,
    pub p: Vec<Vec<f64>>,
    pub future: FutureSpec,
    /// The Dirichlet prior; also the base of a gamma-weight mixture.
    pub dirichlet: DirichletPriorSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture: Option<MixtureConfig>,
    #[serde(default)]
    pub settings: RhsSettings,
}

impl IdentityConfig {
    pub fn mixture_prior(&self) -> Result<Option<GeneralShrinkagePriorSpec>, CliError> {
        Ok(match &self.mixture {
            None => None,
            Some(MixtureConfig::Atoms(m)) => Some(m.clone()),
            Some(MixtureConfig::GammaWeight { alpha, beta, gamma, n_atoms }) => Some(
                GeneralShrinkagePriorSpec::from_gamma_weight(*alpha, *beta, gamma.clone(), self.dirichlet.clone(), *n_atoms)
                    .map_err(|e| CliError::validation(format!("mixture: {e}")))?,
            ),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McDiagnostic {
    pub samples: usize,
    pub burn_in: usize,
}

/// Predictive masses of table outcomes given observed counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredMassConfig {
    pub schema: u32,
    pub spec: ModelSpec,
    pub tables: TableModel,
    pub x: CountData,
    /// Outcomes to evaluate; the whole finite support when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<TableCounts>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dirichlet: Option<DirichletPriorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shrinkage: Option<ShrinkagePriorSpec>,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    /// Adds Monte Carlo estimates next to the quadrature values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McDiagnostic>,
    #[serde(default)]
    pub seed: u64,
}
