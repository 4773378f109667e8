//! Coefficient-wise checks of the lace identities
//! `t_z(k) = 1 + Pi_z(k) + Phi_z(k) t_z(k)` with `Phi_z(k) = z q(k) (1 + Pi_z(k))`
//! and of their even `k_1`-derivatives at `k = 0`.
//!
//! Derivatives at the origin are exact: `d^{2j}/dk_1^{2j}` of a symmetric
//! transform at 0 is `(-1)^j sum_x x_1^{2j} f(x)`. Odd derivatives vanish.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{Field, PiTable, TwoPointTable};

fn check_shared(t: &TwoPointTable, pi: &PiTable) -> Result<()> {
    let (a, b) = (&t.config, &pi.config);
    if a.d != b.d || a.range != b.range || a.profile != b.profile || a.p != b.p || a.eps != b.eps || t.n_max != pi.n_max {
        return Err(Error::Mismatch(format!("two-point table {a:?} (n_max {}) vs pi table {b:?} (n_max {})", t.n_max, pi.n_max)));
    }
    Ok(())
}

/// Coefficient sequences `t_n(k)`, `pi_n(k)` and `Phi_n(k)`.
#[derive(Debug, Clone, Serialize)]
pub struct TransformSeries {
    pub t: Vec<f64>,
    pub pi: Vec<f64>,
    pub phi: Vec<f64>,
}

pub fn transform_series(t: &TwoPointTable, pi: &PiTable, k: &[f64]) -> Result<TransformSeries> {
    check_shared(t, pi)?;
    if k.len() != t.d() {
        return Err(Error::InvalidConfig(format!("wavevector has {} components, table is {}-dimensional", k.len(), t.d())));
    }
    let q = t.q.fourier(k);
    let tk: Vec<f64> = t.tau.iter().map(|f| f.fourier(k)).collect();
    let pk: Vec<f64> = pi.pi.iter().map(|f| f.fourier(k)).collect();
    let mut phi = vec![0.0; tk.len()];
    for m in 1..phi.len() {
        phi[m] = q * (if m == 1 { 1.0 } else { 0.0 } + pk[m - 1]);
    }
    Ok(TransformSeries { t: tk, pi: pk, phi })
}

/// `sup_n |t_n - delta_{n0} - pi_n - sum_{m=1}^n Phi_m t_{n-m}|` at wavevector `k`.
pub fn recursion_residual(t: &TwoPointTable, pi: &PiTable, k: &[f64]) -> Result<f64> {
    let s = transform_series(t, pi, k)?;
    let mut worst: f64 = 0.0;
    for n in 0..s.t.len() {
        let mut rhs = if n == 0 { 1.0 } else { 0.0 } + s.pi[n];
        for m in 1..=n {
            rhs += s.phi[m] * s.t[n - m];
        }
        worst = worst.max((s.t[n] - rhs).abs());
    }
    Ok(worst)
}

/// Signed axis moments of `tau`, `pi` and `q`.
#[derive(Debug, Clone, Serialize)]
pub struct MomentRecursionData {
    pub r_max: usize,
    pub n_max: usize,
    /// `t[j][n] = (-1)^j sum_x x_1^{2j} tau_n(x)`.
    pub t: Vec<Vec<f64>>,
    /// `p[j][n] = (-1)^j sum_x x_1^{2j} pi_n(x)`.
    pub p: Vec<Vec<f64>>,
    /// `q[j] = (-1)^j sum_x x_1^{2j} q(x)`.
    pub q: Vec<f64>,
}

fn signed(f: &Field, j: usize) -> f64 {
    let v = f.axis_moment(j as u32);
    if j % 2 == 1 {
        -v
    } else {
        v
    }
}

impl MomentRecursionData {
    pub fn from_tables(t: &TwoPointTable, pi: &PiTable, r_max: usize) -> Result<Self> {
        check_shared(t, pi)?;
        let tj = (0..=r_max).map(|j| t.tau.iter().map(|f| signed(f, j)).collect()).collect();
        let pj = (0..=r_max).map(|j| pi.pi.iter().map(|f| signed(f, j)).collect()).collect();
        let qj = (0..=r_max).map(|j| signed(&t.q, j)).collect();
        Ok(MomentRecursionData { r_max, n_max: t.n_max, t: tj, p: pj, q: qj })
    }

    fn validate(&self) -> Result<()> {
        let rect = |a: &Vec<Vec<f64>>| a.len() == self.r_max + 1 && a.iter().all(|row| row.len() == self.n_max + 1);
        if !rect(&self.t) || !rect(&self.p) || self.q.len() != self.r_max + 1 {
            return Err(Error::InvalidConfig("moment arrays are not complete up to (r_max, n_max)".into()));
        }
        Ok(())
    }
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// z-coefficients of `d^{2j} Phi_z(0)`:
/// `sum_i C(2j, 2i) Q^{(i)} (delta_{ij} delta_{m1} + p^{(j-i)}_{m-1})`.
fn phi_derivative(m: &MomentRecursionData, j: usize) -> Vec<f64> {
    let mut out = vec![0.0; m.n_max + 1];
    for (step, o) in out.iter_mut().enumerate().skip(1) {
        for i in 0..=j {
            let inner = if i == j && step == 1 { 1.0 } else { 0.0 } + m.p[j - i][step - 1];
            *o += binom(2 * j, 2 * i) * m.q[i] * inner;
        }
    }
    out
}

/// Sup over `n` of the coefficient-wise residual of
/// `d^{2r} t = d^{2r} Pi + sum_j C(2r, 2j) d^{2j} Phi d^{2r-2j} t` at `k = 0`.
pub fn leibniz_residual(m: &MomentRecursionData, r: usize) -> Result<f64> {
    m.validate()?;
    if r > m.r_max {
        return Err(Error::InvalidConfig(format!("order r = {r} exceeds r_max = {}", m.r_max)));
    }
    let phis: Vec<Vec<f64>> = (0..=r).map(|j| phi_derivative(m, j)).collect();
    let mut worst: f64 = 0.0;
    for n in 0..=m.n_max {
        let mut rhs = m.p[r][n] + if r == 0 && n == 0 { 1.0 } else { 0.0 };
        for (j, phi) in phis.iter().enumerate() {
            let c = binom(2 * r, 2 * j);
            for step in 1..=n {
                rhs += c * phi[step] * m.t[r - j][n - step];
            }
        }
        worst = worst.max((m.t[r][n] - rhs).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::exact::{exact_two_point, lace_invert};
    use crate::kernel::{build_kernel, KernelSpec};

    fn reference(n_max: usize) -> (TwoPointTable, PiTable) {
        let k = build_kernel(KernelSpec::uniform(1, 1)).unwrap();
        let t = exact_two_point(&k, 1.0, 1.0, n_max).unwrap();
        let pi = lace_invert(&t);
        (t, pi)
    }

    #[test]
    fn recursion_holds_on_exact_tables() {
        let (t, pi) = reference(5);
        for k in [0.0, PI / 3.0, PI, 1.234] {
            assert!(recursion_residual(&t, &pi, &[k]).unwrap() <= 1e-10);
        }
        let k2 = build_kernel(KernelSpec::uniform(2, 1)).unwrap();
        let t2 = exact_two_point(&k2, 0.9, 0.6, 3).unwrap();
        let pi2 = lace_invert(&t2);
        assert!(recursion_residual(&t2, &pi2, &[0.4, -1.1]).unwrap() <= 1e-10);
        assert!(recursion_residual(&t2, &pi2, &[0.4]).is_err());
    }

    #[test]
    fn random_walk_has_trivial_pi() {
        let k = build_kernel(KernelSpec::uniform(1, 2)).unwrap();
        let t = TwoPointTable::random_walk(&k, 1.0, 0.5, 4).unwrap();
        let pi = lace_invert(&t);
        let s = transform_series(&t, &pi, &[0.7]).unwrap();
        assert!(s.pi.iter().all(|v| v.abs() < 1e-12));
        assert!(recursion_residual(&t, &pi, &[0.7]).unwrap() <= 1e-12);
    }

    #[test]
    fn leibniz_orders() {
        let (t, pi) = reference(5);
        let m = MomentRecursionData::from_tables(&t, &pi, 3).unwrap();
        assert_eq!(m.t[0][0], 1.0);
        assert_eq!(m.p[2][0], 0.0);
        assert_eq!(m.p[2][1], 0.0);
        let r0 = leibniz_residual(&m, 0).unwrap();
        assert!((r0 - recursion_residual(&t, &pi, &[0.0]).unwrap()).abs() < 1e-12);
        for r in 0..=3 {
            assert!(leibniz_residual(&m, r).unwrap() <= 1e-10, "r={r}");
        }
        assert!(leibniz_residual(&m, 4).is_err());
    }

    #[test]
    fn wrong_pairing_is_detected() {
        let (t, pi) = reference(4);
        let bad = {
            let k = build_kernel(KernelSpec::uniform(1, 1)).unwrap();
            lace_invert(&exact_two_point(&k, 0.8, 1.0, 4).unwrap())
        };
        assert!(matches!(recursion_residual(&t, &bad, &[0.0]), Err(Error::Mismatch(_))));
        // a corrupted moment array breaks the identity
        let mut m = MomentRecursionData::from_tables(&t, &pi, 2).unwrap();
        m.p[1][3] += 1e-6;
        assert!(leibniz_residual(&m, 1).unwrap() > 1e-7);
        m.t.pop();
        assert!(leibniz_residual(&m, 1).is_err());
    }
}
