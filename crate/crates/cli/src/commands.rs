use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use negmn::dominance::{
    check_assumption1, check_assumption2, check_cor_multin, check_thm1, check_thm_multin, multin_constants,
    DominanceVerdict, Thm1Variant,
};
use negmn::estimators::{EbAffineSpec, LossWeights, ShrinkageSchedule};
use negmn::nmpredict::{verify_corollary3, verify_theorem4, IdentityReport, NmPrior};
use negmn::predictive::{dirichlet_mc_mass, log_pred_mass_dirichlet, posterior_mc_mass, ShrinkageMass};
use negmn::riskharness::{
    run_point_experiment, run_pred_experiment, write_csv, write_svg, ExperimentOutput, PointExperimentConfig,
    PredExperimentConfig,
};
use negmn::rng::experiment_id;
use negmn::{Field, ProbParam, Rational, RngSpec};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{self, CheckConfig, IdentityConfig, IdentityKind, PredMassConfig, Theorem};
use crate::{CliError, Common, Format};

/// Where one output goes: a file under --output-dir, or stdout.
fn sink(common: &Common, stem: &str, ext: &str) -> Result<Box<dyn Write>, CliError> {
    match &common.output_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::validation(format!("output_dir: cannot create {}: {e}", dir.display())))?;
            let path: PathBuf = dir.join(format!("{stem}.{ext}"));
            let f = File::create(&path)
                .map_err(|e| CliError::validation(format!("output_dir: cannot write {}: {e}", path.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::numerical(format!("write failed: {e}"))
}

fn json_only(common: &Common, command: &str) -> Result<(), CliError> {
    if common.format == Some(Format::Csv) {
        return Err(CliError::validation(format!("format: {command} only writes json")));
    }
    Ok(())
}

fn write_json(common: &Common, stem: &str, value: &Value) -> Result<(), CliError> {
    let mut out = sink(common, stem, "json")?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::numerical(e.to_string()))?;
    writeln!(out).map_err(io_err)?;
    out.flush().map_err(io_err)
}

fn emit_experiment(common: &Common, svg: bool, scenario: &str, result: &ExperimentOutput) -> Result<(), CliError> {
    if svg && common.output_dir.is_none() {
        return Err(CliError::validation("svg: requires --output-dir"));
    }
    match common.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut out = sink(common, scenario, "csv")?;
            write_csv(&mut out, result)?;
            out.flush().map_err(io_err)?;
        }
        Format::Json => {
            let config: Value = serde_json::from_str(&result.config_json).expect("config is valid json");
            write_json(common, scenario, &json!({ "config": config, "rows": result.rows }))?;
        }
    }
    if svg {
        let mut out = sink(common, scenario, "svg")?;
        write_svg(&mut out, result)?;
        out.flush().map_err(io_err)?;
    }
    Ok(())
}

pub fn simulate_point(common: &Common, svg: bool) -> Result<(), CliError> {
    let mut cfg: PointExperimentConfig = config::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(reps) = common.reps {
        cfg.reps = reps;
    }
    let result = run_point_experiment(&cfg)?;
    emit_experiment(common, svg, &cfg.scenario, &result)
}

pub fn simulate_pred(common: &Common, svg: bool) -> Result<(), CliError> {
    let mut cfg: PredExperimentConfig = config::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(reps) = common.reps {
        cfg.reps = reps;
    }
    let result = run_pred_experiment(&cfg)?;
    emit_experiment(common, svg, &cfg.scenario, &result)
}

fn lift<T: Field>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}

fn lift_weights<T: Field>(w: &LossWeights) -> Result<LossWeights<T>, CliError> {
    LossWeights::new(w.c.iter().map(|row| lift(row)).collect(), w.n).map_err(|e| CliError::validation(format!("weights: {e}")))
}

fn lift_schedule<T: Field>(s: &ShrinkageSchedule) -> ShrinkageSchedule<T> {
    match s {
        ShrinkageSchedule::EbMl { a_tilde, delta0 } => ShrinkageSchedule::EbMl { a_tilde: lift(a_tilde), delta0: T::lit(*delta0) },
        ShrinkageSchedule::EbMoment { delta0 } => ShrinkageSchedule::EbMoment { delta0: T::lit(*delta0) },
        ShrinkageSchedule::Tabulated { values, limit } => {
            ShrinkageSchedule::Tabulated { values: values.iter().map(|r| lift(r)).collect(), limit: lift(limit) }
        }
    }
}

fn lift_affine<T: Field>(e: &EbAffineSpec) -> EbAffineSpec<T> {
    EbAffineSpec { b: lift(&e.b), cmat: e.cmat.iter().map(|blk| blk.iter().map(|r| lift(r)).collect()).collect() }
}

fn required<'a, V>(field: &'a Option<V>, name: &str, theorem: Theorem) -> Result<&'a V, CliError> {
    field.as_ref().ok_or_else(|| CliError::validation(format!("{name}: required for --theorem {}", theorem.name())))
}

fn verdict_json(v: &DominanceVerdict) -> Value {
    serde_json::to_value(v).expect("verdict serializes")
}

fn check_in<T: Field>(cfg: &CheckConfig, theorem: Theorem) -> Result<Value, CliError> {
    let spec = &cfg.spec;
    spec.validate().map_err(|e| CliError::validation(format!("spec: {e}")))?;
    let weights = || -> Result<LossWeights<T>, CliError> {
        match &cfg.weights {
            Some(w) => lift_weights(w),
            None => Ok(LossWeights::ones(spec, spec.populations())?),
        }
    };
    let mut out = json!({ "theorem": theorem, "exact": cfg.exact });
    match theorem {
        Theorem::Thm1 => {
            let schedule = lift_schedule::<T>(required(&cfg.schedule, "schedule", theorem)?);
            let variant = cfg.variant.unwrap_or(Thm1Variant::Either);
            out["verdict"] = verdict_json(&check_thm1(spec, &weights()?, &schedule, variant, cfg.x_max)?);
        }
        Theorem::A1 => {
            let affine = lift_affine::<T>(required(&cfg.affine, "affine", theorem)?);
            out["verdict"] = verdict_json(&check_assumption1(spec, &weights()?, &affine, cfg.x_max)?);
        }
        Theorem::A2 => {
            let u = required(&cfg.uniform, "uniform", theorem)?;
            let v = check_assumption2(spec, &weights()?, &lift::<T>(&u.b), &T::lit(u.c), cfg.x_max)?;
            out["verdict"] = verdict_json(&v);
        }
        Theorem::Multin => {
            let tm = required(&cfg.tables, "tables", theorem)?;
            let prior = required(&cfg.prior, "prior", theorem)?;
            let consts = multin_constants::<T>(spec, tm, prior)?;
            out["constants"] = consts
                .iter()
                .enumerate()
                .map(|(nu, (c, k))| json!({ "population": nu, "c": c.to_f64_lossy(), "k": k.to_f64_lossy() }))
                .collect();
            out["verdict"] = verdict_json(&check_thm_multin::<T>(spec, tm, prior)?);
        }
        Theorem::CorMultin => {
            let tm = required(&cfg.tables, "tables", theorem)?;
            tm.check_populations(spec.populations()).map_err(|e| CliError::validation(format!("tables: {e}")))?;
            out["verdict"] = json!({ "holds": check_cor_multin(spec, tm) });
        }
    }
    Ok(out)
}

pub fn check(common: &Common, theorem: Option<Theorem>) -> Result<(), CliError> {
    json_only(common, "check")?;
    let cfg: CheckConfig = config::load(&common.config)?;
    let theorem = theorem
        .or(cfg.theorem)
        .ok_or_else(|| CliError::validation("theorem: pass --theorem or set it in the config"))?;
    let mut out = if cfg.exact { check_in::<Rational>(&cfg, theorem)? } else { check_in::<f64>(&cfg, theorem)? };
    out["config"] = serde_json::to_value(&cfg).expect("config serializes");
    write_json(common, &format!("check-{}", theorem.name()), &out)
}

pub fn verify_identity(common: &Common) -> Result<(), CliError> {
    json_only(common, "verify-identity")?;
    let cfg: IdentityConfig = config::load(&common.config)?;
    cfg.spec.validate().map_err(|e| CliError::validation(format!("spec: {e}")))?;
    cfg.settings.validate().map_err(|e| CliError::validation(format!("settings: {e}")))?;
    let p = ProbParam::new(cfg.p.clone())
        .and_then(|p| p.check_against(&cfg.spec).map(|_| p))
        .map_err(|e| CliError::validation(format!("p: {e}")))?;
    let mixture = cfg.mixture_prior()?;
    let (stem, mut report): (&str, IdentityReport) = match cfg.identity {
        IdentityKind::Theorem4 => {
            let prior: NmPrior<'_> = match &mixture {
                Some(m) => m.into(),
                None => (&cfg.dirichlet).into(),
            };
            ("identity-theorem4", verify_theorem4(&p, &cfg.spec, &cfg.future, prior, &cfg.settings)?)
        }
        IdentityKind::Corollary3 => {
            let m = mixture.as_ref().ok_or_else(|| CliError::validation("mixture: required for corollary3"))?;
            ("identity-corollary3", verify_corollary3(&p, &cfg.spec, &cfg.future, m, &cfg.dirichlet, &cfg.settings)?)
        }
    };
    report.config = Some(serde_json::to_value(&cfg).expect("config serializes"));
    write_json(common, stem, &serde_json::to_value(&report).expect("report serializes"))?;
    if report.holds {
        Ok(())
    } else {
        Err(CliError::numerical(format!(
            "residual {:e} exceeds certified bound {:e}",
            report.residual, report.certified_bound
        )))
    }
}

struct MassRow {
    w_index: usize,
    method: &'static str,
    log_mass: f64,
    error_estimate: f64,
}

pub fn pred_mass(common: &Common) -> Result<(), CliError> {
    let mut cfg: PredMassConfig = config::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let (Some(reps), Some(mc)) = (common.reps, cfg.mc.as_mut()) {
        mc.samples = reps;
    }
    let spec = &cfg.spec;
    spec.validate().map_err(|e| CliError::validation(format!("spec: {e}")))?;
    cfg.tables.check_populations(spec.populations()).map_err(|e| CliError::validation(format!("tables: {e}")))?;
    cfg.x.check_against(spec).map_err(|e| CliError::validation(format!("x: {e}")))?;
    if cfg.dirichlet.is_none() && cfg.shrinkage.is_none() {
        return Err(CliError::validation("dirichlet: at least one of dirichlet and shrinkage is required"));
    }
    let support = match &cfg.w {
        Some(w) => w.clone(),
        None => cfg.tables.support(&spec.m),
    };
    for (k, w) in support.iter().enumerate() {
        w.check_against(&cfg.tables, &spec.m).map_err(|e| CliError::validation(format!("w[{k}]: {e}")))?;
    }
    let hb = match &cfg.shrinkage {
        Some(prior) => Some(ShrinkageMass::new(spec, &cfg.tables, prior, cfg.quadrature)?),
        None => None,
    };
    let rows: Vec<Vec<MassRow>> = support
        .par_iter()
        .enumerate()
        .map(|(k, w)| -> Result<Vec<MassRow>, CliError> {
            let mut rows = Vec::new();
            let mc_row = |method, est: negmn::predictive::McEstimate| MassRow {
                w_index: k,
                method,
                log_mass: est.mean.ln(),
                error_estimate: est.se / est.mean,
            };
            if let Some(prior) = &cfg.dirichlet {
                let v = log_pred_mass_dirichlet(w, &cfg.x, spec, &cfg.tables, prior)?;
                rows.push(MassRow { w_index: k, method: "dirichlet", log_mass: v, error_estimate: 0.0 });
                if let Some(mc) = cfg.mc {
                    let rng = RngSpec::new(cfg.seed, experiment_id(0, k));
                    let est = dirichlet_mc_mass(w, &cfg.x, spec, &cfg.tables, prior, rng, mc.samples)?;
                    rows.push(mc_row("dirichlet-mc", est));
                }
            }
            if let (Some(prior), Some(hb)) = (&cfg.shrinkage, &hb) {
                let v = hb.log_mass(w, &cfg.x)?;
                rows.push(MassRow { w_index: k, method: "shrinkage", log_mass: v.log_mass, error_estimate: v.rel_err });
                if let Some(mc) = cfg.mc {
                    let rng = RngSpec::new(cfg.seed, experiment_id(1, k));
                    let est = posterior_mc_mass(w, &cfg.x, spec, &cfg.tables, prior, rng, mc.samples, mc.burn_in)?;
                    rows.push(mc_row("shrinkage-mc", est));
                }
            }
            Ok(rows)
        })
        .collect::<Result<_, _>>()?;
    let rows: Vec<MassRow> = rows.into_iter().flatten().collect();
    let config = serde_json::to_value(&cfg).expect("config serializes");
    match common.format.unwrap_or(Format::Json) {
        Format::Json => {
            let masses: Vec<Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "w-index": r.w_index,
                        "w": support[r.w_index].w,
                        "log-mass": r.log_mass,
                        "method": r.method,
                        "error-estimate": r.error_estimate,
                    })
                })
                .collect();
            write_json(common, "pred-mass", &json!({ "config": config, "masses": masses }))
        }
        Format::Csv => {
            let mut out = sink(common, "pred-mass", "csv")?;
            writeln!(out, "# {config}").map_err(io_err)?;
            writeln!(out, "w_index,method,log_mass,error_estimate").map_err(io_err)?;
            for r in &rows {
                writeln!(out, "{},{},{},{}", r.w_index, r.method, r.log_mass, r.error_estimate).map_err(io_err)?;
            }
            out.flush().map_err(io_err)
        }
    }
}
