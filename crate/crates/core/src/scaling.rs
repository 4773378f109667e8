//! Verdicts on moment tables: amplitudes `A_s = lim n^{-s/2} m_s(n)`, the
//! Gaussian amplitude relation, Hölder interpolation between moments and the
//! small-time behaviour of the contact process.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::moments::{Model, MomentTable, NormMode, Provenance};
use crate::series::gaussian_moment;
use crate::stats::ols_slope;

#[derive(Debug, Clone, Serialize)]
pub struct AmplitudeFit {
    pub s: f64,
    pub norm: NormMode,
    pub window: (f64, f64),
    pub points: usize,
    pub estimate: f64,
    /// Average of the per-row errors: exact if the rows were perfectly
    /// correlated, conservative otherwise.
    pub stderr: f64,
    /// Least-squares slope of `n^{-s/2} m_s(n)` against `log n`.
    pub drift: f64,
}

/// Plain average of `n^{-s/2} m_s(n)` over the rows with `n` in the window.
pub fn fit_amplitude(m: &MomentTable, s: f64, window: (f64, f64), norm: NormMode) -> Result<AmplitudeFit> {
    let (lo, hi) = window;
    let rows: Vec<_> =
        m.rows.iter().filter(|r| r.s == s && r.norm == norm && r.time >= lo && r.time <= hi && r.time > 0.0).collect();
    if rows.len() < 2 {
        return Err(Error::Window(format!("{} rows with s = {s} in [{lo}, {hi}], need 2", rows.len())));
    }
    let k = rows.len() as f64;
    let scaled: Vec<f64> = rows.iter().map(|r| r.mean * r.time.powf(-0.5 * s)).collect();
    let estimate = scaled.iter().sum::<f64>() / k;
    let stderr = rows.iter().map(|r| r.stderr * r.time.powf(-0.5 * s)).sum::<f64>() / k;
    let logs: Vec<f64> = rows.iter().map(|r| r.time.ln()).collect();
    let drift = ols_slope(&logs, &scaled);
    Ok(AmplitudeFit { s, norm, window, points: rows.len(), estimate, stderr, drift })
}

/// Gaussian prediction `A_0 (A_2 / (d A_0))^{s/2} E|Z|^s`, with `A_2` the
/// Euclidean second amplitude in both modes.
pub fn predicted_amplitude(a0: f64, a2: f64, s: f64, d: usize, mode: NormMode) -> Result<f64> {
    if !(a0 > 0.0 && a2 > 0.0) {
        return Err(Error::InvalidConfig(format!("amplitudes must be positive, got A_0 = {a0}, A_2 = {a2}")));
    }
    let g = gaussian_moment(s, d, mode)?;
    Ok(a0 * (a2 / (d as f64 * a0)).powf(0.5 * s) * g)
}

pub fn amplitude_relation_residual(a0: f64, a2: f64, a_s: f64, s: f64, d: usize, mode: NormMode) -> Result<f64> {
    if !(a_s > 0.0) {
        return Err(Error::InvalidConfig(format!("A_s must be positive, got {a_s}")));
    }
    let pred = predicted_amplitude(a0, a2, s, d, mode)?;
    Ok((a_s - pred).abs() / a_s)
}

#[derive(Debug, Clone, Serialize)]
pub struct HolderRow {
    pub time: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `(rhs - lhs) / rhs`; `>= -1e-12` passes.
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HolderReport {
    pub s: f64,
    pub r: f64,
    pub norm: NormMode,
    pub rows: Vec<HolderRow>,
    pub worst_margin: f64,
    pub passed: bool,
}

pub const HOLDER_TOLERANCE: f64 = 1e-12;

/// `m_s <= m_{2r}^{s/(2r)} m_0^{1 - s/(2r)}` at every time carrying all three
/// rows. The rows must come from the same samples.
pub fn holder_check(m: &MomentTable, s: f64, r: f64, norm: NormMode) -> Result<HolderReport> {
    if !(s >= 0.0 && s < 2.0 * r) {
        return Err(Error::InvalidConfig(format!("need 0 <= s < 2r, got s = {s}, r = {r}")));
    }
    let inv_a = s / (2.0 * r);
    let mut rows = Vec::new();
    for t in m.times() {
        let (Some(ms), Some(m2r), Some(m0)) = (m.row(t, s, norm), m.row(t, 2.0 * r, norm), m.row(t, 0.0, norm)) else {
            continue;
        };
        let n = m.provenance.samples;
        if ms.samples != n || m2r.samples != n || m0.samples != n {
            return Err(Error::Mismatch(format!("rows at time {t} do not share the table's {n} samples")));
        }
        let rhs = m2r.mean.powf(inv_a) * m0.mean.powf(1.0 - inv_a);
        let margin = if rhs > 0.0 { (rhs - ms.mean) / rhs } else if ms.mean == 0.0 { 0.0 } else { -1.0 };
        rows.push(HolderRow { time: t, lhs: ms.mean, rhs, margin });
    }
    if rows.is_empty() {
        return Err(Error::Window(format!("no time carries rows for s = {s}, 2r = {}, 0", 2.0 * r)));
    }
    let worst_margin = rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    Ok(HolderReport { s, r, norm, rows, worst_margin, passed: worst_margin >= -HOLDER_TOLERANCE })
}

/// Hölder checks of two tables against each other are refused: the
/// inequality is only exact on one empirical measure.
pub fn holder_check_across(a: &MomentTable, b: &MomentTable, s: f64, r: f64, norm: NormMode) -> Result<HolderReport> {
    if a.provenance != b.provenance {
        return Err(Error::Mismatch(format!("provenance {:?} vs {:?}", a.provenance, b.provenance)));
    }
    let mut merged = a.clone();
    for row in &b.rows {
        if merged.row(row.time, row.s, row.norm).is_none() {
            merged.rows.push(row.clone());
        }
    }
    holder_check(&merged, s, r, norm)
}

#[derive(Debug, Clone, Serialize)]
pub struct DichotomyCurve {
    pub s: f64,
    /// `(t, m_s(t) / max(1, t^{s/2}))`.
    pub normalized: Vec<(f64, f64)>,
    pub sup: f64,
    /// Twice the largest normalized value over `t >= 1`.
    pub c_tilde: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DichotomyReport {
    pub provenance: Provenance,
    pub curves: Vec<DichotomyCurve>,
    pub passed: bool,
}

pub fn dichotomy_report(m: &MomentTable, s_list: &[f64]) -> Result<DichotomyReport> {
    if m.provenance.model != Model::Cp {
        return Err(Error::InvalidConfig("dichotomy report needs a contact-process table".into()));
    }
    let mut curves = Vec::new();
    for &s in s_list {
        let normalized: Vec<(f64, f64)> = m
            .rows
            .iter()
            .filter(|r| r.s == s && r.norm == NormMode::Euclidean)
            .map(|r| (r.time, r.mean / r.time.powf(0.5 * s).max(1.0)))
            .collect();
        let late: Vec<f64> = normalized.iter().filter(|(t, _)| *t >= 1.0).map(|(_, v)| *v).collect();
        if late.is_empty() || normalized.len() == late.len() {
            return Err(Error::Window(format!("s = {s}: the time grid must reach both t < 1 and t >= 1")));
        }
        let c_tilde = 2.0 * late.iter().cloned().fold(0.0, f64::max);
        let sup = normalized.iter().map(|(_, v)| *v).fold(0.0, f64::max);
        let finite = normalized.iter().all(|(_, v)| v.is_finite());
        let early_ok = m.rows.iter().filter(|r| r.s == s && r.norm == NormMode::Euclidean && r.time < 1.0).all(|r| r.mean <= c_tilde);
        curves.push(DichotomyCurve { s, normalized, sup, c_tilde, passed: finite && early_ok });
    }
    let passed = curves.iter().all(|c| c.passed);
    Ok(DichotomyReport { provenance: m.provenance.clone(), curves, passed })
}
