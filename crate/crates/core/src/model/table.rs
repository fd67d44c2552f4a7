use rand::Rng;
use serde::{Deserialize, Serialize};

use super::lattice::{compositions, ProductLattice};
use super::negmn::multinomial_sample;
use super::ProbParam;
use crate::error::{Error, Result};
use crate::special::{ln_factorial, log_sum_exp};

/// Structure of the multinomial tables. Table λ cross-classifies populations
/// `nu[λ]` (0-based, strictly increasing) and records `l[λ]` independent trials.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableModel {
    pub nu: Vec<Vec<usize>>,
    pub l: Vec<u64>,
}

impl TableModel {
    pub fn new(nu: Vec<Vec<usize>>, l: Vec<u64>) -> Result<Self> {
        let tm = Self { nu, l };
        if tm.nu.is_empty() {
            return Err(Error::domain("a table model needs at least one table"));
        }
        if tm.nu.len() != tm.l.len() {
            return Err(Error::domain(format!("{} index lists but {} trial counts", tm.nu.len(), tm.l.len())));
        }
        for (lambda, axes) in tm.nu.iter().enumerate() {
            if axes.is_empty() {
                return Err(Error::domain(format!("table {lambda} has no axes")));
            }
            if axes.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::domain(format!("table {lambda} axes must be strictly increasing")));
            }
            if tm.l[lambda] == 0 {
                return Err(Error::domain(format!("l[{lambda}] must be at least 1")));
            }
        }
        Ok(tm)
    }

    /// Number of tables L.
    pub fn tables(&self) -> usize {
        self.nu.len()
    }

    pub fn check_populations(&self, n_pop: usize) -> Result<()> {
        for (lambda, axes) in self.nu.iter().enumerate() {
            if let Some(&bad) = axes.iter().find(|&&v| v >= n_pop) {
                return Err(Error::Index(format!("table {lambda} refers to population {bad}, only {n_pop} exist")));
            }
        }
        Ok(())
    }

    /// Λ(ν): the tables that include population ν.
    pub fn tables_of(&self, nu: usize) -> Vec<usize> {
        (0..self.tables()).filter(|&lam| self.nu[lam].contains(&nu)).collect()
    }

    /// Axis of table λ that carries population ν.
    pub fn axis_of(&self, lambda: usize, nu: usize) -> Option<usize> {
        self.nu[lambda].iter().position(|&v| v == nu)
    }

    /// Σ_{λ∈Λ(ν)} l^(λ)
    pub fn trials_touching(&self, nu: usize) -> u64 {
        self.tables_of(nu).iter().map(|&lam| self.l[lam]).sum()
    }

    /// Cell layout of table λ: (m_{ν_1}+1) × … × (m_{ν_d}+1).
    pub fn lattice(&self, lambda: usize, m: &[usize]) -> ProductLattice {
        ProductLattice::new(self.nu[lambda].iter().map(|&v| m[v] + 1).collect())
    }

    /// Every table outcome, i.e. the finite set 𝒲.
    pub fn support(&self, m: &[usize]) -> Vec<TableCounts> {
        let per_table: Vec<Vec<Vec<u64>>> = (0..self.tables())
            .map(|lam| compositions(self.l[lam], self.lattice(lam, m).len()).collect())
            .collect();
        let outer = ProductLattice::new(per_table.iter().map(Vec::len).collect());
        (0..outer.len())
            .map(|f| {
                let idx = outer.unflatten(f);
                TableCounts { w: idx.iter().enumerate().map(|(lam, &j)| per_table[lam][j].clone()).collect() }
            })
            .collect()
    }
}

/// Table outcomes: `w[λ]` is the row-major array over the cells of table λ.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TableCounts {
    pub w: Vec<Vec<u64>>,
}

impl TableCounts {
    pub fn check_against(&self, tm: &TableModel, m: &[usize]) -> Result<()> {
        tm.check_populations(m.len())?;
        if self.w.len() != tm.tables() {
            return Err(Error::domain(format!("{} tables given, model has {}", self.w.len(), tm.tables())));
        }
        for lam in 0..tm.tables() {
            let cells = tm.lattice(lam, m).len();
            if self.w[lam].len() != cells {
                return Err(Error::domain(format!("table {lam} has {} cells, expected {cells}", self.w[lam].len())));
            }
            let total: u64 = self.w[lam].iter().sum();
            if total != tm.l[lam] {
                return Err(Error::domain(format!("table {lam} counts sum to {total}, expected {}", tm.l[lam])));
            }
        }
        Ok(())
    }
}

/// The sufficient statistics of a table outcome: s_{i,ν}(w) for i = 0..=m_ν and
/// log C(w) = Σ_λ [log l^(λ)! − Σ_𝐢 log w_𝐢!].
#[derive(Debug, Clone, PartialEq)]
pub struct TableStats {
    pub s: Vec<Vec<u64>>,
    pub log_c: f64,
}

impl TableStats {
    pub fn compute(w: &TableCounts, tm: &TableModel, m: &[usize]) -> Result<Self> {
        w.check_against(tm, m)?;
        let mut s: Vec<Vec<u64>> = m.iter().map(|&mv| vec![0; mv + 1]).collect();
        let mut log_c = 0.0;
        for lam in 0..tm.tables() {
            let lat = tm.lattice(lam, m);
            log_c += ln_factorial(tm.l[lam]);
            for (flat, &count) in w.w[lam].iter().enumerate() {
                if count == 0 {
                    continue;
                }
                log_c -= ln_factorial(count);
                for (h, &i) in lat.unflatten(flat).iter().enumerate() {
                    s[tm.nu[lam][h]][i] += count;
                }
            }
        }
        Ok(Self { s, log_c })
    }

    /// s_{0,ν}(w)
    pub fn s0(&self, nu: usize) -> u64 {
        self.s[nu][0]
    }
}

/// s_{i,ν}(w); `i = 0` is the residual cell.
pub fn table_s(w: &TableCounts, tm: &TableModel, m: &[usize], i: usize, nu: usize) -> Result<u64> {
    if nu >= m.len() {
        return Err(Error::Index(format!("population {nu} out of range 0..{}", m.len())));
    }
    if i > m[nu] {
        return Err(Error::Index(format!("cell {i} out of range 0..={} for population {nu}", m[nu])));
    }
    Ok(TableStats::compute(w, tm, m)?.s[nu][i])
}

/// log f(w | p) = log C(w) + Σ_ν Σ_{i=0}^{m_ν} s_{i,ν}(w) log p_{i,ν}.
pub fn table_log_pmf(w: &TableCounts, tm: &TableModel, p: &ProbParam) -> Result<f64> {
    p.validate()?;
    let m: Vec<usize> = p.p.iter().map(Vec::len).collect();
    let stats = TableStats::compute(w, tm, &m)?;
    Ok(stats_log_pmf(&stats, p))
}

/// Same as [`table_log_pmf`] from precomputed statistics; cells with s = 0 are
/// skipped so that a vanishing probability does not produce 0·(−∞).
pub fn stats_log_pmf(stats: &TableStats, p: &ProbParam) -> f64 {
    let mut out = stats.log_c;
    for (nu, row) in stats.s.iter().enumerate() {
        for (i, &s) in row.iter().enumerate() {
            if s > 0 {
                out += s as f64 * p.cell(nu, i).ln();
            }
        }
    }
    out
}

/// Draws every trial by choosing each axis cell independently, which is the
/// product-form cell law of the table.
pub fn table_sample<R: Rng + ?Sized>(rng: &mut R, tm: &TableModel, p: &ProbParam) -> Result<TableCounts> {
    p.validate()?;
    let m: Vec<usize> = p.p.iter().map(Vec::len).collect();
    tm.check_populations(m.len())?;
    let probs: Vec<Vec<f64>> = (0..m.len()).map(|nu| (0..=m[nu]).map(|i| p.cell(nu, i)).collect()).collect();
    let mut w = Vec::with_capacity(tm.tables());
    for lam in 0..tm.tables() {
        let lat = tm.lattice(lam, &m);
        let mut counts = vec![0u64; lat.len()];
        let mut idx = vec![0usize; tm.nu[lam].len()];
        for _ in 0..tm.l[lam] {
            for (h, &nu) in tm.nu[lam].iter().enumerate() {
                idx[h] = categorical(rng, &probs[nu]);
            }
            counts[lat.flatten(&idx)] += 1;
        }
        w.push(counts);
    }
    Ok(TableCounts { w })
}

fn categorical<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let draw = multinomial_sample(rng, 1, probs);
    draw.iter().position(|&c| c == 1).unwrap_or(probs.len() - 1)
}

/// log Σ_{w∈𝒲} exp(log f(w | p)); used by normalization checks.
pub fn table_log_total_mass(tm: &TableModel, p: &ProbParam) -> Result<f64> {
    let m: Vec<usize> = p.p.iter().map(Vec::len).collect();
    let logs = tm
        .support(&m)
        .iter()
        .map(|w| table_log_pmf(w, tm, p))
        .collect::<Result<Vec<f64>>>()?;
    Ok(log_sum_exp(&logs))
}
