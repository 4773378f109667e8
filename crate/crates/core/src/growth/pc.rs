//! Critical intensity by bisection on the flatness of `log m_0(n)`.
//!
//! At a trial intensity the mean frontier size `m_0(n)` is estimated over a
//! window `[n1, n2]` and the least-squares slope of `log m_0` against
//! `log n` is taken. Negative slope means subcritical, positive means
//! supercritical. The statistical error of the slope is a jackknife over
//! sixteen contiguous groups of clusters.

use std::sync::Arc;

use serde::Serialize;

use super::{chunk_accumulators, merge_all, EvolutionConfig, MomentRequest, Stepper};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kernel::Kernel;
use crate::moments::NormMode;
use crate::rng::derive_seed;
use crate::stats::{ols_slope, Accumulator};

const TAG_PC: u64 = 0x7063_0000;
const JACKKNIFE_GROUPS: usize = 16;

#[derive(Debug, Clone)]
pub struct PcSearch {
    pub kernel: Arc<Kernel>,
    pub epsilon: f64,
    pub window: (u64, u64),
    pub p_lo: f64,
    pub p_hi: f64,
    /// Stop when the bracket is narrower than this.
    pub tolerance: f64,
    /// Clusters per trial intensity.
    pub samples: u64,
    pub seed: u64,
    /// A frontier larger than this classifies the trial as supercritical
    /// without finishing the sample.
    pub frontier_cap: usize,
    pub max_iterations: usize,
}

impl PcSearch {
    pub fn new(kernel: Arc<Kernel>, epsilon: f64, window: (u64, u64), p_lo: f64, p_hi: f64) -> Self {
        PcSearch {
            kernel,
            epsilon,
            window,
            p_lo,
            p_hi,
            tolerance: 1e-3,
            samples: 20_000,
            seed: 0,
            frontier_cap: 20_000,
            max_iterations: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Subcritical,
    Supercritical,
}

#[derive(Debug, Clone, Serialize)]
pub struct PcProbe {
    pub p: f64,
    /// `-inf` when every cluster died inside the window, `+inf` when the
    /// frontier cap was hit.
    pub slope: f64,
    pub slope_stderr: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct PcEstimate {
    pub p_c: f64,
    pub bracket: (f64, f64),
    pub width: f64,
    /// Slope and its error at the last trial intensity.
    pub slope: f64,
    pub slope_stderr: f64,
    pub probes: Vec<PcProbe>,
    /// `|p_c - 1| <= 0.5`.
    pub sane: bool,
}

fn check_window(window: (u64, u64)) -> Result<()> {
    let (n1, n2) = window;
    if n1 < 10 || n2 <= n1 {
        return Err(Error::Window(format!("need n2 > n1 >= 10, got [{n1}, {n2}]")));
    }
    Ok(())
}

fn slope_of(req: &MomentRequest, acc: &[Accumulator]) -> f64 {
    let mut x = Vec::with_capacity(req.n_list.len());
    let mut y = Vec::with_capacity(req.n_list.len());
    for (ni, &n) in req.n_list.iter().enumerate() {
        let m = acc[req.slot(ni, 0, NormMode::Euclidean)].mean();
        if m <= 0.0 {
            return f64::NEG_INFINITY;
        }
        x.push((n as f64).ln());
        y.push(m.ln());
    }
    ols_slope(&x, &y)
}

/// Classifies one intensity by the sign of the window slope.
pub fn classify_intensity(
    kernel: Arc<Kernel>,
    p: f64,
    epsilon: f64,
    window: (u64, u64),
    samples: u64,
    seed: u64,
    frontier_cap: usize,
    exec: &Execution,
) -> Result<PcProbe> {
    check_window(window)?;
    if samples < JACKKNIFE_GROUPS as u64 {
        return Err(Error::InvalidConfig(format!("need at least {JACKKNIFE_GROUPS} samples")));
    }
    let cfg = EvolutionConfig::new(kernel, p, epsilon, window.1).with_samples(samples).with_seed(seed);
    let stepper = Stepper::new(&cfg)?;
    let n_list: Vec<u64> = (window.0..=window.1).collect();
    let req = MomentRequest::new(&[0.0], &n_list)?;
    let stream_seed = derive_seed(seed, TAG_PC);
    let chunks = exec.map_chunks(samples, |_, range| {
        chunk_accumulators(&stepper, window.1, &req, stream_seed, range, Some(frontier_cap))
    });
    let mut done = Vec::with_capacity(chunks.len());
    for c in chunks {
        match c? {
            Some(acc) => done.push(acc),
            None => {
                return Ok(PcProbe {
                    p,
                    slope: f64::INFINITY,
                    slope_stderr: 0.0,
                    verdict: Verdict::Supercritical,
                })
            }
        }
    }
    let total = merge_all(req.len(), &done);
    let slope = slope_of(&req, &total);

    // Jackknife over contiguous groups of chunks.
    let groups = JACKKNIFE_GROUPS.min(done.len());
    let mut slope_stderr = 0.0;
    if groups >= 2 && slope.is_finite() {
        let group_of = |c: usize| c * groups / done.len();
        let mut leave_out = Vec::with_capacity(groups);
        for g in 0..groups {
            let rest = merge_all(req.len(), done.iter().enumerate().filter(|(c, _)| group_of(*c) != g).map(|(_, a)| a));
            leave_out.push(slope_of(&req, &rest));
        }
        if leave_out.iter().all(|s| s.is_finite()) {
            let mean = leave_out.iter().sum::<f64>() / groups as f64;
            let ss: f64 = leave_out.iter().map(|s| (s - mean).powi(2)).sum();
            slope_stderr = ((groups as f64 - 1.0) / groups as f64 * ss).sqrt();
        } else {
            slope_stderr = f64::INFINITY;
        }
    }
    let verdict = if slope > 0.0 { Verdict::Supercritical } else { Verdict::Subcritical };
    Ok(PcProbe { p, slope, slope_stderr, verdict })
}

/// Bisection for `p_c` between `search.p_lo` and `search.p_hi`.
pub fn estimate_pc(search: &PcSearch, exec: &Execution) -> Result<PcEstimate> {
    check_window(search.window)?;
    if !(search.p_lo < search.p_hi) {
        return Err(Error::Bracket(format!("p_lo = {} must be below p_hi = {}", search.p_lo, search.p_hi)));
    }
    let mut probes = Vec::new();
    let mut probe = |p: f64, i: u64| -> Result<PcProbe> {
        let pr = classify_intensity(
            Arc::clone(&search.kernel),
            p,
            search.epsilon,
            search.window,
            search.samples,
            derive_seed(search.seed, i),
            search.frontier_cap,
            exec,
        )?;
        probes.push(pr.clone());
        Ok(pr)
    };
    let lo = probe(search.p_lo, 0)?;
    let hi = probe(search.p_hi, 1)?;
    if lo.verdict != Verdict::Subcritical || hi.verdict != Verdict::Supercritical {
        return Err(Error::Bracket(format!(
            "slope at p_lo={} is {}, at p_hi={} is {}",
            lo.p, lo.slope, hi.p, hi.slope
        )));
    }
    let (mut a, mut b) = (search.p_lo, search.p_hi);
    let mut last = hi;
    let mut i = 2;
    while b - a > search.tolerance && (i as usize) < search.max_iterations + 2 {
        let mid = 0.5 * (a + b);
        let pr = probe(mid, i)?;
        match pr.verdict {
            Verdict::Subcritical => a = mid,
            Verdict::Supercritical => b = mid,
        }
        last = pr;
        i += 1;
    }
    let p_c = 0.5 * (a + b);
    Ok(PcEstimate {
        p_c,
        bracket: (a, b),
        width: b - a,
        slope: last.slope,
        slope_stderr: last.slope_stderr,
        probes,
        sane: (p_c - 1.0).abs() <= 0.5,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_kernel, KernelSpec};

    fn k11() -> Arc<Kernel> {
        Arc::new(build_kernel(KernelSpec::uniform(1, 1)).unwrap())
    }

    #[test]
    fn half_intensity_is_subcritical() {
        let pr = classify_intensity(k11(), 0.5, 1.0, (10, 40), 2000, 1, 10_000, &Execution::sequential()).unwrap();
        assert_eq!(pr.verdict, Verdict::Subcritical);
        assert!(pr.slope < 0.0);
    }

    #[test]
    fn full_intensity_is_supercritical() {
        // p = 2 opens every bond for d = 1, L = 1.
        let pr = classify_intensity(k11(), 2.0, 1.0, (10, 40), 64, 1, 10_000, &Execution::sequential()).unwrap();
        assert_eq!(pr.verdict, Verdict::Supercritical);
    }

    #[test]
    fn preconditions() {
        let s = PcSearch::new(k11(), 1.0, (5, 40), 0.5, 2.0);
        assert!(matches!(estimate_pc(&s, &Execution::sequential()), Err(Error::Window(_))));
        // beyond 1 / (eps * max D) = 2
        let r = classify_intensity(k11(), 2.5, 1.0, (10, 40), 64, 1, 100, &Execution::sequential());
        assert!(matches!(r, Err(Error::InvalidConfig(_))));
        let mut s = PcSearch::new(k11(), 1.0, (10, 40), 0.3, 0.5);
        s.samples = 500;
        assert!(matches!(estimate_pc(&s, &Execution::sequential()), Err(Error::Bracket(_))));
    }

    #[test]
    fn one_dimensional_bisection() {
        // Oriented bond percolation on Z x Z+ has p_c(bond) ~ 0.6447, i.e.
        // intensity ~ 1.289 here.
        let mut s = PcSearch::new(k11(), 1.0, (10, 60), 0.8, 2.0);
        s.samples = 4000;
        s.tolerance = 0.02;
        s.seed = 3;
        let est = estimate_pc(&s, &Execution::sequential()).unwrap();
        assert!(est.width <= 0.02);
        assert!((est.p_c - 1.289).abs() < 0.1, "{est:?}");
        assert!(est.sane);
    }
}
