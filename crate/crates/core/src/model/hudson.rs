use super::negmn::TruncatedLattice;
use super::{CountData, ModelSpec, ProbParam};
use crate::error::{Error, Result};
use crate::special::pairwise_sum;

/// Both sides of the Hudson identity for cell (i, ν), 0-based:
/// E[φ(X)/p_{i,ν}] and E[(r_ν + X_{·,ν})/(X_{i,ν}+1) · φ(X + e_{i,ν})], each summed
/// exactly over a lattice whose neglected probability is at most `trunc`.
///
/// φ must vanish wherever x_{i,ν} = 0; a violation found on the lattice is a
/// contract error.
pub fn hudson_lhs_rhs<F>(
    phi: F,
    spec: &ModelSpec,
    p: &ProbParam,
    i: usize,
    nu: usize,
    trunc: f64,
    budget: usize,
) -> Result<(f64, f64)>
where
    F: Fn(&CountData) -> f64,
{
    if nu >= spec.populations() || i >= spec.m[nu] {
        return Err(Error::Index(format!("cell ({i}, {nu}) outside the model")));
    }
    let lattice = TruncatedLattice::new(spec, p, trunc, budget)?;
    let p_i = p.p[nu][i];
    let r = spec.r[nu];
    let mut lhs = Vec::with_capacity(lattice.len());
    let mut rhs = Vec::with_capacity(lattice.len());
    for (x, lp) in lattice.iter() {
        let here = phi(&x);
        if x.x[nu][i] == 0 && here != 0.0 {
            return Err(Error::Contract(format!(
                "φ({:?}) = {here} but x[{nu}][{i}] = 0",
                x.x
            )));
        }
        let prob = lp.exp();
        lhs.push(prob * here / p_i);
        let shifted = phi(&x.plus_unit(i, nu));
        let factor = (r + x.row_sum(nu) as f64) / (x.x[nu][i] as f64 + 1.0);
        rhs.push(prob * factor * shifted);
    }
    Ok((pairwise_sum(&lhs), pairwise_sum(&rhs)))
}
