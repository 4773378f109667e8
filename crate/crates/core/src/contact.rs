//! Continuous-time contact process by event-driven (Gillespie) simulation.
//!
//! With `k` infected sites the next event comes after an `Exp(k(1 + p))`
//! wait. It heals a uniformly chosen infected site with probability
//! `1 / (1 + p)`; otherwise it is an infection arrow from a uniformly chosen
//! infected `y` to `y + X` with `X ~ D`, which infects the target only if the
//! target is healthy. A healthy `x` is therefore infected at rate
//! `p * sum_y xi_y D(x - y)` and no per-site rates are ever stored.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::growth::{estimate_moments, EvolutionConfig, MomentRequest};
use crate::kernel::Kernel;
use crate::lattice::Site;
use crate::moments::{Model, MomentTable, NormMode, Provenance};
use crate::rng::{derive_seed, sample_stream};
use crate::stats::Accumulator;

const TAG_CP: u64 = 0x6370_0000;

/// Vector of sites with an index for O(1) membership and swap-remove.
#[derive(Debug, Clone, Default)]
pub struct IndexedSet {
    items: Vec<Site>,
    index: HashMap<Site, usize>,
}

impl IndexedSet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, x: &Site) -> bool {
        self.index.contains_key(x)
    }

    pub fn as_slice(&self) -> &[Site] {
        &self.items
    }

    /// Inserts `x`; returns `false` when already present.
    pub fn insert(&mut self, x: Site) -> bool {
        if self.index.contains_key(&x) {
            return false;
        }
        self.index.insert(x, self.items.len());
        self.items.push(x);
        true
    }

    pub fn swap_remove(&mut self, i: usize) -> Site {
        let x = self.items.swap_remove(i);
        self.index.remove(&x);
        if i < self.items.len() {
            self.index.insert(self.items[i], i);
        }
        x
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct EventCounters {
    pub events: u64,
    pub healings: u64,
    pub infections: u64,
    /// Arrows onto already infected sites.
    pub null_events: u64,
    /// `integral of k(1 + p) dt`, the expected number of events.
    pub exposure: f64,
}

#[derive(Debug, Clone)]
pub struct CpState {
    pub time: f64,
    pub infected: IndexedSet,
    pub extinct_at: Option<f64>,
    pub counters: EventCounters,
}

impl CpState {
    /// A single infected individual at the origin at time zero.
    pub fn initial() -> Self {
        let mut infected = IndexedSet::default();
        infected.insert(Site::ORIGIN);
        CpState { time: 0.0, infected, extinct_at: None, counters: EventCounters::default() }
    }
}

/// Runs the dynamics until `t_target` (which may be infinite; the run then
/// ends only at extinction).
pub fn evolve_to<R: Rng + ?Sized>(
    mut state: CpState,
    t_target: f64,
    p: f64,
    kernel: &Kernel,
    rng: &mut R,
) -> Result<CpState> {
    if !(t_target >= state.time) {
        return Err(Error::InvalidConfig(format!("target time {t_target} precedes {}", state.time)));
    }
    if !(p >= 0.0 && p.is_finite()) {
        return Err(Error::InvalidConfig(format!("p must be finite and >= 0, got {p}")));
    }
    let d = kernel.dim();
    let heal_prob = 1.0 / (1.0 + p);
    loop {
        let k = state.infected.len();
        if k == 0 {
            state.extinct_at.get_or_insert(state.time);
            state.time = t_target;
            return Ok(state);
        }
        let rate = k as f64 * (1.0 + p);
        let wait: f64 = Exp1.sample(rng);
        let dt = wait / rate;
        if state.time + dt > t_target {
            state.counters.exposure += (t_target - state.time) * rate;
            state.time = t_target;
            return Ok(state);
        }
        state.counters.exposure += dt * rate;
        state.time += dt;
        state.counters.events += 1;
        let i = rng.random_range(0..k);
        if rng.random::<f64>() < heal_prob {
            state.infected.swap_remove(i);
            state.counters.healings += 1;
        } else {
            let source = state.infected.as_slice()[i];
            let target = source
                .checked_add(&kernel.sample_offset(rng), d)
                .ok_or(Error::Overflow { generation: state.counters.events })?;
            if state.infected.insert(target) {
                state.counters.infections += 1;
            } else {
                state.counters.null_events += 1;
            }
        }
    }
}

fn check_times(t_list: &[f64]) -> Result<Vec<f64>> {
    if t_list.is_empty() {
        return Err(Error::InvalidConfig("time list must be non-empty".into()));
    }
    if let Some(t) = t_list.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        return Err(Error::InvalidConfig(format!("times must be finite and >= 0, got {t}")));
    }
    let mut t = t_list.to_vec();
    t.sort_by(f64::total_cmp);
    t.dedup();
    Ok(t)
}

/// Unbiased estimates of `sum_x |x|^s P(x in C_t)` for each `t` and `s`,
/// all from the same trajectories.
pub fn estimate_cp_moments(
    p: f64,
    kernel: Arc<Kernel>,
    t_list: &[f64],
    s_list: &[f64],
    samples: u64,
    seed: u64,
    exec: &Execution,
) -> Result<MomentTable> {
    if samples == 0 {
        return Err(Error::InvalidConfig("samples must be positive".into()));
    }
    let times = check_times(t_list)?;
    let idx: Vec<u64> = (0..times.len() as u64).collect();
    let req = MomentRequest::new(s_list, &idx)?;
    let d = kernel.dim();
    let stream_seed = derive_seed(seed, TAG_CP);
    let chunks = exec.map_chunks(samples, |_, range| -> Result<Vec<Accumulator>> {
        let mut acc = vec![Accumulator::default(); req.len()];
        let mut values = vec![0.0; req.len()];
        for i in range {
            let mut rng = sample_stream(stream_seed, i);
            values.iter_mut().for_each(|v| *v = 0.0);
            let mut state = CpState::initial();
            for (ti, &t) in times.iter().enumerate() {
                state = evolve_to(state, t, p, &kernel, &mut rng)?;
                if state.infected.is_empty() {
                    break;
                }
                req.record(ti, state.infected.as_slice(), d, &mut values);
            }
            for (a, &v) in acc.iter_mut().zip(&values) {
                a.push(v);
            }
        }
        Ok(acc)
    });
    let mut total = vec![Accumulator::default(); req.len()];
    for c in chunks {
        for (t, a) in total.iter_mut().zip(&c?) {
            t.merge(a);
        }
    }
    let provenance = Provenance {
        model: Model::Cp,
        d,
        range: kernel.range(),
        p,
        eps: None,
        seed,
        samples,
    };
    Ok(MomentTable { provenance, rows: req.rows(&total, |i| times[i as usize]) })
}

/// `floor(t / eps)`, robust to `t / eps` landing a hair below an integer.
pub fn generations_for(t: f64, eps: f64) -> u64 {
    let q = t / eps;
    let r = q.round();
    if (q - r).abs() <= 1e-9 * q.abs().max(1.0) {
        r as u64
    } else {
        q.floor() as u64
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub n: u64,
    pub s: f64,
    pub mean: f64,
    pub stderr: f64,
    /// Discretized minus continuous-time estimate.
    pub gap: f64,
    pub gap_stderr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepTrend {
    pub s: f64,
    /// Weighted least-squares `(a, b)` in `gap ~ a eps + b eps^2`.
    pub coefficients: (f64, f64),
    /// Largest `|gap - trend(eps)| / gap_stderr` over the sweep.
    pub max_z: f64,
    /// Every gap within 4 combined standard errors of the trend.
    pub consistent: bool,
    /// The fitted trend is monotone on `[0, max eps]`, so it heads to zero.
    pub monotone: bool,
    /// `|gap|` does not grow as `eps` decreases, up to 4 combined errors.
    pub nonincreasing: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub p: f64,
    pub t: f64,
    pub continuous: Vec<(f64, f64, f64)>,
    pub rows: Vec<SweepRow>,
    pub trends: Vec<SweepTrend>,
    pub discrete_tables: Vec<MomentTable>,
    pub continuous_table: MomentTable,
}

/// Discretized moments at `n = floor(t / eps)` for each `eps`, against the
/// continuous-time reference at `t`.
pub fn discretization_sweep(
    p: f64,
    kernel: Arc<Kernel>,
    t: f64,
    s_list: &[f64],
    eps_list: &[f64],
    samples: u64,
    seed: u64,
    exec: &Execution,
) -> Result<SweepReport> {
    if eps_list.is_empty() {
        return Err(Error::InvalidConfig("eps list must be non-empty".into()));
    }
    let continuous_table = estimate_cp_moments(p, Arc::clone(&kernel), &[t], s_list, samples, seed, exec)?;
    let reference = |s: f64| continuous_table.row(t, s, NormMode::Euclidean).expect("row exists");
    let mut rows = Vec::new();
    let mut discrete_tables = Vec::new();
    for (i, &eps) in eps_list.iter().enumerate() {
        let n = generations_for(t, eps);
        let cfg = EvolutionConfig::new(Arc::clone(&kernel), p, eps, n)
            .with_samples(samples)
            .with_seed(derive_seed(seed, i as u64 + 1));
        let table = estimate_moments(&cfg, s_list, &[n], exec)?;
        for &s in &continuous_table.s_values() {
            let r = table.row(n as f64, s, NormMode::Euclidean).expect("row exists");
            let c = reference(s);
            rows.push(SweepRow {
                eps,
                n,
                s,
                mean: r.mean,
                stderr: r.stderr,
                gap: r.mean - c.mean,
                gap_stderr: (r.stderr.powi(2) + c.stderr.powi(2)).sqrt(),
            });
        }
        discrete_tables.push(table);
    }
    let trends = continuous_table.s_values().iter().map(|&s| trend(s, &rows)).collect();
    let continuous = continuous_table
        .s_values()
        .iter()
        .map(|&s| {
            let r = reference(s);
            (s, r.mean, r.stderr)
        })
        .collect();
    Ok(SweepReport { p, t, continuous, rows, trends, discrete_tables, continuous_table })
}

fn trend(s: f64, rows: &[SweepRow]) -> SweepTrend {
    let mut sel: Vec<&SweepRow> = rows.iter().filter(|r| r.s == s).collect();
    sel.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    // Zero-error rows (e.g. s > 0 at p = 0) get unit weight.
    let w = |r: &SweepRow| if r.gap_stderr > 0.0 { r.gap_stderr.powi(-2) } else { 1.0 };
    let (mut s11, mut s12, mut s22, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for r in &sel {
        let (e, e2) = (r.eps, r.eps * r.eps);
        s11 += w(r) * e * e;
        s12 += w(r) * e * e2;
        s22 += w(r) * e2 * e2;
        y1 += w(r) * e * r.gap;
        y2 += w(r) * e2 * r.gap;
    }
    let det = s11 * s22 - s12 * s12;
    let (a, b) = if sel.len() >= 2 && det > 1e-12 * s11 * s22 {
        ((y1 * s22 - y2 * s12) / det, (y2 * s11 - y1 * s12) / det)
    } else if s11 > 0.0 {
        (y1 / s11, 0.0)
    } else {
        (0.0, 0.0)
    };
    let fit = |e: f64| a * e + b * e * e;
    let z = |r: &SweepRow| {
        let dev = (r.gap - fit(r.eps)).abs();
        if r.gap_stderr > 0.0 {
            dev / r.gap_stderr
        } else if dev <= 1e-12 * r.gap.abs().max(1.0) {
            0.0
        } else {
            f64::INFINITY
        }
    };
    let max_z = sel.iter().map(|r| z(r)).fold(0.0, f64::max);
    let eps_max = sel.first().map_or(0.0, |r| r.eps);
    let monotone = a * (a + 2.0 * b * eps_max) >= 0.0;
    let nonincreasing = sel.windows(2).all(|w| {
        let tol = 4.0 * (w[0].gap_stderr.powi(2) + w[1].gap_stderr.powi(2)).sqrt();
        w[1].gap.abs() <= w[0].gap.abs() + tol
    });
    SweepTrend { s, coefficients: (a, b), max_z, consistent: max_z <= 4.0, monotone, nonincreasing }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_kernel, KernelSpec};

    fn k11() -> Arc<Kernel> {
        Arc::new(build_kernel(KernelSpec::uniform(1, 1)).unwrap())
    }

    #[test]
    fn indexed_set_swap_remove() {
        let mut s = IndexedSet::default();
        for v in 0..5 {
            assert!(s.insert(Site::from_coords(&[v])));
        }
        assert!(!s.insert(Site::from_coords(&[2])));
        s.swap_remove(1);
        assert!(!s.contains(&Site::from_coords(&[1])));
        assert!(s.contains(&Site::from_coords(&[4])));
        let i = s.as_slice().iter().position(|x| *x == Site::from_coords(&[4])).unwrap();
        s.swap_remove(i);
        assert_eq!(s.len(), 3);
        for x in s.as_slice() {
            assert!(s.contains(x));
        }
    }

    #[test]
    fn empty_state_is_absorbing() {
        let k = k11();
        let st = CpState { infected: IndexedSet::default(), ..CpState::initial() };
        let out = evolve_to(st, 5.0, 2.0, &k, &mut sample_stream(0, 0)).unwrap();
        assert_eq!(out.time, 5.0);
        assert!(out.infected.is_empty());
        assert!(evolve_to(out, 1.0, 2.0, &k, &mut sample_stream(0, 0)).is_err());
    }

    #[test]
    fn pure_healing_extinction_is_exponential() {
        let k = k11();
        let n = 10_000;
        let mut times: Vec<f64> = (0..n)
            .map(|i| {
                let st = evolve_to(CpState::initial(), f64::INFINITY, 0.0, &k, &mut sample_stream(8, i)).unwrap();
                st.extinct_at.unwrap()
            })
            .collect();
        times.sort_by(f64::total_cmp);
        let ks = times
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let f = 1.0 - (-t).exp();
                (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        // 1% critical value of the one-sample KS statistic
        assert!(ks < 1.63 / (n as f64).sqrt(), "KS = {ks}");
    }

    #[test]
    fn small_time_second_moment() {
        // Branching approximation p sigma^2 t e^{(p-1) t}; exclusion effects
        // are O(t^2) and covered by the 1% allowance.
        let t = 0.01;
        let table = estimate_cp_moments(2.0, k11(), &[t], &[2.0], 1_000_000, 21, &Execution::default()).unwrap();
        let r = table.row(t, 2.0, NormMode::Euclidean).unwrap();
        let expect = 2.0 * t * (t).exp();
        assert!((r.mean - expect).abs() < 4.0 * r.stderr + 0.01 * expect, "{r:?} vs {expect}");
    }

    #[test]
    fn event_rate_matches_exposure() {
        let k = k11();
        let mut c = EventCounters::default();
        for i in 0..2000 {
            let st = evolve_to(CpState::initial(), 3.0, 1.5, &k, &mut sample_stream(31, i)).unwrap();
            c.events += st.counters.events;
            c.exposure += st.counters.exposure;
            assert_eq!(st.counters.events, st.counters.healings + st.counters.infections + st.counters.null_events);
        }
        let z = (c.events as f64 - c.exposure) / c.exposure.sqrt();
        assert!(z.abs() < 3.0, "events {} exposure {} z {z}", c.events, c.exposure);
    }

    #[test]
    fn time_zero_moments_are_exact() {
        let t = estimate_cp_moments(2.0, k11(), &[0.0, 1.0], &[0.0, 2.0], 500, 1, &Execution::sequential()).unwrap();
        let r0 = t.row(0.0, 0.0, NormMode::Euclidean).unwrap();
        let r2 = t.row(0.0, 2.0, NormMode::Euclidean).unwrap();
        assert_eq!((r0.mean, r0.stderr), (1.0, 0.0));
        assert_eq!((r2.mean, r2.stderr), (0.0, 0.0));
        assert!(estimate_cp_moments(2.0, k11(), &[1.0], &[0.0], 0, 1, &Execution::sequential()).is_err());
    }

    #[test]
    fn floor_convention() {
        assert_eq!(generations_for(2.5, 1.0), 2);
        assert_eq!(generations_for(2.0, 0.05), 40);
        assert_eq!(generations_for(2.0, 0.1), 20);
        assert_eq!(generations_for(0.3, 0.1), 3);
        assert_eq!(generations_for(0.29, 0.1), 2);
    }

    #[test]
    fn zero_intensity_sweep_matches_closed_forms() {
        let t = 2.0;
        let eps = [1.0, 0.5, 0.2];
        let rep = discretization_sweep(0.0, k11(), t, &[0.0, 2.0], &eps, 20_000, 5, &Execution::sequential()).unwrap();
        let (_, cm, cse) = rep.continuous[0];
        assert!((cm - (-t).exp()).abs() < 4.0 * cse);
        for r in rep.rows.iter().filter(|r| r.s == 0.0) {
            let exact = (1.0 - r.eps).powi(r.n as i32);
            assert!((r.mean - exact).abs() <= 4.0 * r.stderr + 1e-15, "{r:?}");
        }
        for r in rep.rows.iter().filter(|r| r.s == 2.0) {
            assert_eq!(r.mean, 0.0);
        }
        assert_eq!(rep.rows[0].n, 2);
    }
}
