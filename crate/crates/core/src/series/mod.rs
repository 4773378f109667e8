//! Generating-function tools: coefficient extraction on circles inside the
//! unit disk, the Tauberian majorant for functions with power-law
//! singularities at `z = 1`, the lace identities in Fourier-Laplace form, the
//! Riemann-sum tail and Gaussian moments.

pub mod identities;
pub mod quad;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::moments::NormMode;
use crate::stats::KahanSum;

pub use identities::{leibniz_residual, recursion_residual, MomentRecursionData};

#[derive(Debug, Clone, Serialize)]
pub struct CoefficientSeries {
    pub label: String,
    pub coefficients: Vec<f64>,
}

impl CoefficientSeries {
    pub fn order(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }
}

/// One term `C |1 - z|^{-u} (1 - |z|)^{-v}` of a bound on `|f(z)|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MajorantTerm {
    pub c: f64,
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularMajorant {
    pub terms: Vec<MajorantTerm>,
}

impl SingularMajorant {
    pub fn new(terms: &[(f64, f64, f64)]) -> Result<Self> {
        let mut out = Vec::with_capacity(terms.len());
        for &(c, u, v) in terms {
            if !(c >= 0.0 && u >= 1.0 && v >= 0.0) || !(c.is_finite() && u.is_finite() && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("majorant term (C={c}, u={u}, v={v}) needs C>=0, u>=1, v>=0")));
            }
            out.push(MajorantTerm { c, u, v });
        }
        Ok(SingularMajorant { terms: out })
    }

    /// The bound at `z`.
    pub fn bound(&self, z: Complex64) -> f64 {
        let a = (Complex64::new(1.0, 0.0) - z).norm();
        let b = 1.0 - z.norm();
        self.terms.iter().map(|t| t.c * a.powf(-t.u) * b.powf(-t.v)).sum()
    }
}

/// Radius of the extraction circle for the `n`-th coefficient.
pub fn cauchy_radius(n: u32) -> f64 {
    if n <= 2 {
        0.5
    } else {
        1.0 - 1.0 / n as f64
    }
}

/// Aliasing on the circle picks up `a_{n+M} r^M ~ a_{n+M} e^{-M/n}`, so `M = 48n`
/// leaves it below double precision for polynomially growing coefficients.
pub fn default_nodes(n: u32) -> usize {
    512.max(48 * n as usize)
}

/// `a_n` of `f` by the trapezoidal rule on `M` nodes of the circle of radius
/// `cauchy_radius(n)`.
pub fn cauchy_coefficient<F: Fn(Complex64) -> Complex64>(f: F, n: u32, nodes: usize) -> Result<f64> {
    if nodes < 8 {
        return Err(Error::InvalidConfig(format!("need at least 8 nodes, got {nodes}")));
    }
    let r = cauchy_radius(n);
    let mut re = KahanSum::default();
    for k in 0..nodes {
        let theta = 2.0 * PI * k as f64 / nodes as f64;
        let w = f(Complex64::from_polar(r, theta));
        if !(w.re.is_finite() && w.im.is_finite()) {
            return Err(Error::NonFinite(format!("f(r e^(i {theta})) = {w}")));
        }
        // angle reduced mod 2 pi before the trig calls
        let phase = 2.0 * PI * ((n as u64 * k as u64) % nodes as u64) as f64 / nodes as f64;
        re.add((w * Complex64::from_polar(1.0, -phase)).re);
    }
    Ok(re.value() / nodes as f64 / r.powi(n as i32))
}

/// `sup_{m >= 2} (1 - 1/m)^{-m}`, attained at `m = 2`.
pub const K_SUP: f64 = 4.0;

/// `int_{-pi}^{pi} |1 - r e^{i theta}|^{-u} d theta`.
pub fn circle_integral(r: f64, u: f64) -> f64 {
    let g = |theta: f64| {
        let s = (0.5 * theta).sin();
        ((1.0 - r) * (1.0 - r) + 4.0 * r * s * s).powf(-0.5 * u)
    };
    2.0 * quad::peaked_integral(g, (1.0 - r).max(1e-300), PI, 1e-11)
}

/// `K/(2 pi) sum_j C_j n^{v_j} int |1 - r_n e^{i theta}|^{-u_j} d theta`.
pub fn tauberian_majorant(b: &SingularMajorant, n: u32) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!("majorant needs n >= 2, got {n}")));
    }
    let r = cauchy_radius(n);
    let total: f64 = b
        .terms
        .iter()
        .filter(|t| t.c > 0.0)
        .map(|t| t.c * (n as f64).powf(t.v) * circle_integral(r, t.u))
        .sum();
    Ok(K_SUP / (2.0 * PI) * total)
}

#[derive(Debug, Clone, Serialize)]
pub struct TauberianRow {
    pub n: u32,
    pub coefficient: f64,
    pub majorant: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TauberianReport {
    pub rows: Vec<TauberianRow>,
    pub passed: bool,
    /// Largest `|a_n| / majorant(n)`.
    pub worst_ratio: f64,
}

/// Spot-checks `|f| <= b` on a polar grid of the open disk.
pub fn check_hypothesis<F: Fn(Complex64) -> Complex64>(f: &F, b: &SingularMajorant) -> Result<()> {
    let radii = [0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 0.95, 0.99, 0.999];
    for &r in &radii {
        for k in 0..64 {
            let z = Complex64::from_polar(r, 2.0 * PI * k as f64 / 64.0);
            let lhs = f(z).norm();
            let rhs = b.bound(z);
            if !(lhs <= rhs * (1.0 + 1e-12)) {
                return Err(Error::Hypothesis(format!("|f({z})| = {lhs} exceeds the majorant {rhs}")));
            }
        }
    }
    Ok(())
}

pub fn check_tauberian<F: Fn(Complex64) -> Complex64>(
    f: F,
    b: &SingularMajorant,
    n_range: std::ops::RangeInclusive<u32>,
) -> Result<TauberianReport> {
    check_hypothesis(&f, b)?;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for n in n_range {
        let coefficient = cauchy_coefficient(&f, n, default_nodes(n))?;
        let majorant = tauberian_majorant(b, n)?;
        worst = worst.max(coefficient.abs() / majorant);
        rows.push(TauberianRow { n, coefficient, majorant, margin: majorant - coefficient.abs() });
    }
    let passed = rows.iter().all(|r| r.margin >= 0.0);
    Ok(TauberianReport { rows, passed, worst_ratio: worst })
}

#[derive(Debug, Clone, Serialize)]
pub struct RiemannTail {
    pub a: f64,
    pub theta: f64,
    pub sum: f64,
    /// Closed form of the sum for `a` in {0, 1, 2}.
    pub closed_form: Option<f64>,
    pub gamma_prediction: f64,
    pub ratio: f64,
}

/// `sum_{n >= 1} n^a e^{-n theta}` against `Gamma(a+1) theta^{-a-1}`.
pub fn riemann_tail(a: f64, theta: f64) -> Result<RiemannTail> {
    if !(a >= 0.0) || !(theta > 0.0) || !a.is_finite() || !theta.is_finite() {
        return Err(Error::InvalidConfig(format!("need a >= 0 and theta > 0, got a={a}, theta={theta}")));
    }
    let cutoff = ((a + 50.0) / theta).ceil() as u64;
    let mut acc = KahanSum::default();
    for n in 1..=cutoff {
        let x = n as f64;
        acc.add((a * x.ln() - x * theta).exp());
    }
    let sum = acc.value();
    let q = (-theta).exp();
    let one_minus = -(-theta).exp_m1();
    let closed_form = if a == 0.0 {
        Some(q / one_minus)
    } else if a == 1.0 {
        Some(q / (one_minus * one_minus))
    } else if a == 2.0 {
        Some(q * (1.0 + q) / one_minus.powi(3))
    } else {
        None
    };
    let gamma_prediction = (ln_gamma(a + 1.0) - (a + 1.0) * theta.ln()).exp();
    let ratio = closed_form.unwrap_or(sum) / gamma_prediction;
    Ok(RiemannTail { a, theta, sum, closed_form, gamma_prediction, ratio })
}

/// `E|Z|^s` for a standard normal `Z` in `R^d` (`Euclidean`) or for one
/// standard normal coordinate (`FirstComponent`).
pub fn gaussian_moment(s: f64, d: usize, mode: NormMode) -> Result<f64> {
    if !(s >= 0.0) || d == 0 {
        return Err(Error::InvalidConfig(format!("need s >= 0, d >= 1, got s={s}, d={d}")));
    }
    if s.fract() == 0.0 && s as u64 % 2 == 0 && s <= 64.0 {
        // even order: products of integers, exact in floating point
        let k = s as u64 / 2;
        return Ok(match mode {
            NormMode::FirstComponent => (0..k).map(|i| (2 * i + 1) as f64).product(),
            NormMode::Euclidean => (0..k).map(|i| (d as u64 + 2 * i) as f64).product(),
        });
    }
    let v = match mode {
        NormMode::FirstComponent => ln_gamma(s + 1.0) - ln_gamma(0.5 * s + 1.0) - 0.5 * s * 2f64.ln(),
        NormMode::Euclidean => 0.5 * s * 2f64.ln() + ln_gamma(0.5 * (s + d as f64)) - ln_gamma(0.5 * d as f64),
    };
    Ok(v.exp())
}
