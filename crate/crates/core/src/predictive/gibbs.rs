use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::mass::require_finite;
use super::{DirichletPriorSpec, ShrinkagePriorSpec};
use crate::error::{Error, Result};
use crate::model::{stats_log_pmf, CountData, ModelSpec, ProbParam, TableCounts, TableModel, TableStats};
use crate::rng::RngSpec;

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub se: f64,
}

/// Mean and batch-means standard error with ⌊√n⌋ batches.
pub fn batch_means(values: &[f64]) -> McEstimate {
    let n = values.len();
    let mean = crate::special::pairwise_sum(values) / n as f64;
    let batches = (n as f64).sqrt().floor() as usize;
    if batches < 2 {
        return McEstimate { mean, se: f64::NAN };
    }
    let size = n / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| values[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    McEstimate { mean, se: (var / batches as f64).sqrt() }
}

fn gamma_draw<R: Rng + ?Sized>(rng: &mut R, shape: f64, scale: f64) -> Result<f64> {
    let shape = require_finite(shape, "gamma shape")?;
    let scale = require_finite(scale, "gamma scale")?;
    let g = Gamma::new(shape, scale).map_err(|e| Error::Sampler(format!("gamma({shape}, {scale}): {e}")))?;
    Ok(g.sample(rng))
}

/// Dirichlet draw over (p₀, p_1, …, p_m) returned as (p₀, [p_1..p_m]).
fn dirichlet_draw<R: Rng + ?Sized>(rng: &mut R, a0: f64, a: &[f64]) -> Result<(f64, Vec<f64>)> {
    let g0 = gamma_draw(rng, a0, 1.0)?;
    let gs = a.iter().map(|&ai| gamma_draw(rng, ai, 1.0)).collect::<Result<Vec<f64>>>()?;
    let total = g0 + gs.iter().sum::<f64>();
    if !(total > 0.0) {
        return Err(Error::Sampler("Dirichlet draw collapsed to zero".into()));
    }
    Ok((g0 / total, gs.iter().map(|g| g / total).collect()))
}

fn draw_p<R: Rng + ?Sized>(
    rng: &mut R,
    x: &CountData,
    spec: &ModelSpec,
    base: &DirichletPriorSpec,
    extra: &[f64],
) -> Result<(Vec<f64>, ProbParam)> {
    let mut p0 = Vec::with_capacity(spec.populations());
    let mut p = Vec::with_capacity(spec.populations());
    for nu in 0..spec.populations() {
        let a: Vec<f64> = x.x[nu].iter().zip(&base.a[nu]).map(|(&xi, &ai)| xi as f64 + ai).collect();
        let (q0, q) = dirichlet_draw(rng, extra[nu] + spec.r[nu] + base.a0[nu], &a)?;
        p0.push(q0);
        p.push(q);
    }
    Ok((p0, ProbParam { p }))
}

/// Estimates E[f(w | p) | X] under the shrinkage prior by a two-block Gibbs
/// sampler: u | p is Gamma(α, β + Σ_ν γ_ν(−ln p_{0,ν})) and p_ν | u, X is
/// Dirichlet(γ_ν u + r_ν + a_{0,ν}, X_{i,ν} + a_{i,ν}).
#[allow(clippy::too_many_arguments)]
pub fn posterior_mc_mass(
    w: &TableCounts,
    x: &CountData,
    spec: &ModelSpec,
    tm: &TableModel,
    prior: &ShrinkagePriorSpec,
    rng: RngSpec,
    n_samples: usize,
    burn_in: usize,
) -> Result<McEstimate> {
    x.check_against(spec)?;
    prior.check_proper(spec)?;
    let stats = TableStats::compute(w, tm, &spec.m)?;
    let mut rng = rng.rng();
    let mut u = prior.alpha / prior.beta;
    let mut values = Vec::with_capacity(n_samples);
    for step in 0..burn_in + n_samples {
        let extra: Vec<f64> = prior.gamma.iter().map(|g| g * u).collect();
        let (p0, p) = draw_p(&mut rng, x, spec, &prior.base, &extra)?;
        let rate = prior.beta + prior.gamma.iter().zip(&p0).map(|(g, q)| -g * q.ln()).sum::<f64>();
        u = gamma_draw(&mut rng, prior.alpha, 1.0 / rate)?;
        if step >= burn_in {
            values.push(stats_log_pmf(&stats, &p).exp());
        }
    }
    Ok(batch_means(&values))
}

/// Estimates E[f(w | p) | X] under the Dirichlet prior from independent posterior draws.
pub fn dirichlet_mc_mass(
    w: &TableCounts,
    x: &CountData,
    spec: &ModelSpec,
    tm: &TableModel,
    prior: &DirichletPriorSpec,
    rng: RngSpec,
    n_samples: usize,
) -> Result<McEstimate> {
    x.check_against(spec)?;
    prior.check_proper(spec)?;
    let stats = TableStats::compute(w, tm, &spec.m)?;
    let mut rng = rng.rng();
    let zeros = vec![0.0; spec.populations()];
    let mut values = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let (_, p) = draw_p(&mut rng, x, spec, prior, &zeros)?;
        values.push(stats_log_pmf(&stats, &p).exp());
    }
    Ok(batch_means(&values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_means_of_constant() {
        let e = batch_means(&[2.0; 100]);
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.se, 0.0);
    }

    #[test]
    fn dirichlet_draws_lie_in_simplex() {
        let mut rng = RngSpec::new(4, 0).rng();
        for _ in 0..100 {
            let (p0, p) = dirichlet_draw(&mut rng, 2.0, &[0.5, 1.5]).unwrap();
            assert!(((p0 + p.iter().sum::<f64>()) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bad_shape_is_sampler_error() {
        let mut rng = RngSpec::new(4, 0).rng();
        assert!(matches!(gamma_draw(&mut rng, f64::NAN, 1.0), Err(Error::Sampler(_))));
    }
}
