//! Adaptive Gauss–Kronrod integration and Gauss–Legendre rules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance and work limit for the adaptive rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { rel_tol: 1e-10, max_subdivisions: 200 }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-3) {
            return Err(Error::domain(format!("rel_tol = {} must lie in (0, 1e-3]", self.rel_tol)));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::domain("max_subdivisions must be positive"));
        }
        Ok(())
    }
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// One 15-point Kronrod estimate on [a, b] with |K15 − G7| as its error.
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_err: f64,
}

/// Globally adaptive bisection on [a, b], starting from the given breakpoints.
pub fn integrate_interval(
    f: impl Fn(f64) -> f64,
    breakpoints: &[f64],
    quad: &QuadratureSpec,
) -> Result<Integral> {
    quad.validate()?;
    let mut pieces: Vec<(f64, f64, f64, f64)> = breakpoints
        .windows(2)
        .map(|w| {
            let (v, e) = gk15(&f, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();
    let mut splits = 0usize;
    loop {
        let value: f64 = pieces.iter().map(|p| p.2).sum();
        let err: f64 = pieces.iter().map(|p| p.3).sum();
        if !value.is_finite() || !err.is_finite() {
            return Err(Error::Integration { achieved: f64::INFINITY, requested: quad.rel_tol });
        }
        if err <= quad.rel_tol * value.abs() || err == 0.0 {
            return Ok(Integral { value, abs_err: err });
        }
        if splits >= quad.max_subdivisions {
            let achieved = if value != 0.0 { err / value.abs() } else { f64::INFINITY };
            return Err(Error::Integration { achieved, requested: quad.rel_tol });
        }
        let worst = (0..pieces.len())
            .max_by(|&i, &j| pieces[i].3.total_cmp(&pieces[j].3))
            .expect("nonempty");
        let (a, b, _, _) = pieces.swap_remove(worst);
        let mid = 0.5 * (a + b);
        let (v1, e1) = gk15(&f, a, mid);
        let (v2, e2) = gk15(&f, mid, b);
        pieces.push((a, mid, v1, e1));
        pieces.push((mid, b, v2, e2));
        splits += 1;
    }
}

/// log ∫₀^∞ exp(ℓ(u)) du with its relative error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogIntegral {
    pub log_value: f64,
    pub rel_err: f64,
}

/// Integrates a positive function over (0, ∞) given its logarithm.
///
/// The peak of the integrand on the ln u scale is located by a coarse grid and
/// golden-section refinement; u = s·t/(1−t) with s at the peak maps the half-line
/// onto (0, 1) with the bulk of the mass near t = ½, and the integrand is
/// exponentiated relative to its value there.
pub fn integrate_log_half_line(log_f: impl Fn(f64) -> f64, quad: &QuadratureSpec) -> Result<LogIntegral> {
    let g = |v: f64| {
        let u = v.exp();
        log_f(u) + v
    };
    let v_star = maximize(&g, -40.0, 40.0);
    let scale = v_star.exp();
    let shift = g(v_star);
    let integrand = |t: f64| {
        if t <= 0.0 || t >= 1.0 {
            return 0.0;
        }
        let u = scale * t / (1.0 - t);
        let jac = scale / ((1.0 - t) * (1.0 - t));
        let lv = log_f(u) + jac.ln() - shift;
        if lv.is_nan() {
            f64::NAN
        } else {
            lv.exp()
        }
    };
    let res = integrate_interval(integrand, &[0.0, 0.25, 0.5, 0.75, 1.0], quad)?;
    if !(res.value > 0.0) {
        return Err(Error::Integration { achieved: f64::INFINITY, requested: quad.rel_tol });
    }
    Ok(LogIntegral { log_value: res.value.ln() + shift, rel_err: res.abs_err / res.value })
}

/// Maximizer of `g` on [lo, hi]: best point of a grid with spacing ½, refined by
/// golden-section search between its neighbours.
fn maximize(g: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let step = 0.5;
    let n = ((hi - lo) / step).round() as usize;
    let mut best = (lo, f64::NEG_INFINITY);
    for k in 0..=n {
        let v = lo + k as f64 * step;
        let val = g(v);
        if val > best.1 {
            best = (v, val);
        }
    }
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..60 {
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + phi * (b - a);
            gd = g(d);
        }
        if (b - a).abs() < 1e-9 {
            break;
        }
    }
    let mid = 0.5 * (a + b);
    if g(mid) >= best.1 {
        mid
    } else {
        best.0
    }
}

/// Gauss–Legendre nodes and weights on [−1, 1], computed by Newton iteration on
/// the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// ∫_a^b f with an n-point Gauss–Legendre rule.
pub fn gauss_legendre_integral(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let terms: Vec<f64> = x.iter().zip(&w).map(|(&xi, &wi)| wi * f(mid + half * xi)).collect();
    half * crate::special::pairwise_sum(&terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::ln_gamma;

    #[test]
    fn gamma_integral() {
        // ∫ u^{a−1} e^{−bu} du = Γ(a)/b^a
        for &(a, b) in &[(1.0, 1.0), (0.5, 2.0), (7.5, 0.3), (40.0, 3.0)] {
            let q = QuadratureSpec::default();
            let r = integrate_log_half_line(|u: f64| (a - 1.0) * u.ln() - b * u, &q).unwrap();
            let exact = ln_gamma(a) - a * f64::ln(b);
            assert!((r.log_value - exact).abs() < 1e-9, "{a} {b}: {} vs {exact}", r.log_value);
        }
    }

    #[test]
    fn finite_interval_polynomial() {
        let r = integrate_interval(|x| x.powi(5) - 2.0 * x, &[0.0, 2.0], &QuadratureSpec::default()).unwrap();
        assert!((r.value - (64.0 / 6.0 - 4.0)).abs() < 1e-12);
    }

    #[test]
    fn failure_reports_achieved_error() {
        let q = QuadratureSpec { rel_tol: 1e-14, max_subdivisions: 1 };
        let err = integrate_interval(|x: f64| 1.0 / x, &[1e-12, 1.0], &q).unwrap_err();
        assert!(matches!(err, Error::Integration { .. }));
    }

    #[test]
    fn legendre_rules() {
        for n in [1usize, 2, 5, 32, 64] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13, "n = {n}");
            // exact for degree 2n−1
            let deg = 2 * n - 1;
            let approx: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((approx - exact).abs() < 1e-12, "n = {n}");
        }
        let v = gauss_legendre_integral(f64::exp, 0.0, 1.0, 16);
        assert!((v - (std::f64::consts::E - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn spec_validation() {
        assert!(QuadratureSpec { rel_tol: 0.1, max_subdivisions: 10 }.validate().is_err());
        assert!(QuadratureSpec::default().validate().is_ok());
    }
}
