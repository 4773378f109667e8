//! Monte Carlo of the oriented-percolation frontier of the origin's cluster.
//!
//! Only the cluster of `(0, 0)` is simulated. Each oriented bond out of the
//! current frontier is examined exactly once, so the frontier is a Markov
//! chain and the simulation is exact in law. With `epsilon < 1` the same
//! chain is the discretized contact process: temporal bonds `(x, x)` are open
//! with probability `1 - epsilon`, spatial bonds `(x, y)` with probability
//! `epsilon * p * D(y - x)`.

mod pc;

pub use pc::{classify_intensity, estimate_pc, PcEstimate, PcProbe, PcSearch, Verdict};

use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kernel::{abs_pow, norm_pow, Kernel};
use crate::lattice::Site;
use crate::moments::{Model, MomentRow, MomentTable, NormMode, Provenance};
use crate::rng::{derive_seed, sample_stream};
use crate::stats::Accumulator;

/// Key under which cluster streams of `estimate_moments` are derived.
pub(crate) const TAG_CLUSTERS: u64 = 0x6f70_636c;

#[derive(Debug, Clone)]
pub struct EvolutionConfig {
    pub kernel: Arc<Kernel>,
    /// Expected number of occupied spatial bonds per vertex (not a probability).
    pub p: f64,
    /// `1` means pure oriented percolation without temporal bonds.
    pub epsilon: f64,
    pub horizon: u64,
    pub seed: u64,
    pub samples: u64,
}

impl EvolutionConfig {
    pub fn new(kernel: Arc<Kernel>, p: f64, epsilon: f64, horizon: u64) -> Self {
        EvolutionConfig { kernel, p, epsilon, horizon, seed: 0, samples: 1 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_samples(mut self, samples: u64) -> Self {
        self.samples = samples;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let eps = self.epsilon;
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidConfig(format!("epsilon must lie in (0, 1], got {eps}")));
        }
        if !(self.p >= 0.0 && self.p.is_finite()) {
            return Err(Error::InvalidConfig(format!("p must be finite and >= 0, got {}", self.p)));
        }
        let bond = eps * self.p * self.kernel.max_prob();
        if bond > 1.0 + 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "epsilon * p * max D = {bond} exceeds 1 (p must be <= {})",
                1.0 / (eps * self.kernel.max_prob())
            )));
        }
        let reach = (self.horizon as i128) * (self.kernel.range() as i128);
        if reach >= (i64::MAX / 2) as i128 {
            return Err(Error::InvalidConfig(format!("horizon * L = {reach} risks coordinate overflow")));
        }
        Ok(())
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            model: Model::Op,
            d: self.kernel.dim(),
            range: self.kernel.range(),
            p: self.p,
            eps: Some(self.epsilon),
            seed: self.seed,
            samples: self.samples,
        }
    }
}

/// Occupied sites of one generation, sorted and distinct.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frontier {
    pub generation: u64,
    pub sites: Vec<Site>,
}

impl Frontier {
    /// `F_0 = {0}`.
    pub fn origin() -> Self {
        Frontier { generation: 0, sites: vec![Site::ORIGIN] }
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }
}

enum Spatial {
    /// All spatial bonds share one probability: draw how many are open,
    /// then which.
    Uniform(Binomial),
    PerBond(Vec<f64>),
}

/// Per-configuration sampling state for one generation step.
pub(crate) struct Stepper {
    kernel: Arc<Kernel>,
    temporal: f64,
    spatial: Spatial,
}

impl Stepper {
    pub(crate) fn new(cfg: &EvolutionConfig) -> Result<Stepper> {
        cfg.validate()?;
        let k = &cfg.kernel;
        let scale = cfg.epsilon * cfg.p;
        let spatial = if k.is_uniform() {
            let m = k.support().len() as u64;
            let b = (scale / m as f64).min(1.0);
            Spatial::Uniform(Binomial::new(m, b).map_err(|e| Error::InvalidConfig(e.to_string()))?)
        } else {
            Spatial::PerBond(k.probabilities().iter().map(|&d| (scale * d).min(1.0)).collect())
        };
        Ok(Stepper { kernel: Arc::clone(k), temporal: 1.0 - cfg.epsilon, spatial })
    }

    /// Writes the next generation of `sites` into `next`.
    pub(crate) fn step_into<R: Rng + ?Sized>(
        &self,
        sites: &[Site],
        next: &mut Vec<Site>,
        generation: u64,
        rng: &mut R,
    ) -> Result<()> {
        next.clear();
        let d = self.kernel.dim();
        let support = self.kernel.support();
        let overflow = || Error::Overflow { generation: generation + 1 };
        for x in sites {
            if self.temporal > 0.0 && rng.random::<f64>() < self.temporal {
                next.push(*x);
            }
            match &self.spatial {
                Spatial::Uniform(binom) => {
                    let k = binom.sample(rng) as usize;
                    match k {
                        0 => {}
                        1 => {
                            let j = rng.random_range(0..support.len());
                            next.push(x.checked_add(&support[j], d).ok_or_else(overflow)?);
                        }
                        _ => {
                            for j in index::sample(rng, support.len(), k) {
                                next.push(x.checked_add(&support[j], d).ok_or_else(overflow)?);
                            }
                        }
                    }
                }
                Spatial::PerBond(probs) => {
                    for (off, &b) in support.iter().zip(probs) {
                        if rng.random::<f64>() < b {
                            next.push(x.checked_add(off, d).ok_or_else(overflow)?);
                        }
                    }
                }
            }
        }
        next.sort_unstable();
        next.dedup();
        Ok(())
    }
}

/// One generation of the frontier chain.
pub fn step<R: Rng + ?Sized>(f: &Frontier, cfg: &EvolutionConfig, rng: &mut R) -> Result<Frontier> {
    let stepper = Stepper::new(cfg)?;
    let mut next = Vec::new();
    stepper.step_into(&f.sites, &mut next, f.generation, rng)?;
    Ok(Frontier { generation: f.generation + 1, sites: next })
}

/// Which statistics to record for each cluster.
///
/// Values are laid out as `[n][s][norm]` with norms ordered
/// Euclidean, first-component.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentRequest {
    pub s_list: Vec<f64>,
    pub n_list: Vec<u64>,
}

impl MomentRequest {
    pub fn new(s_list: &[f64], n_list: &[u64]) -> Result<Self> {
        if s_list.is_empty() || n_list.is_empty() {
            return Err(Error::InvalidConfig("s and n lists must be non-empty".into()));
        }
        if let Some(s) = s_list.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return Err(Error::InvalidConfig(format!("moment order s must be finite and >= 0, got {s}")));
        }
        let mut n_list = n_list.to_vec();
        n_list.sort_unstable();
        n_list.dedup();
        let mut s_out: Vec<f64> = Vec::new();
        for &s in s_list {
            if !s_out.contains(&s) {
                s_out.push(s);
            }
        }
        Ok(MomentRequest { s_list: s_out, n_list })
    }

    pub fn len(&self) -> usize {
        self.n_list.len() * self.s_list.len() * 2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn slot(&self, n_idx: usize, s_idx: usize, norm: NormMode) -> usize {
        (n_idx * self.s_list.len() + s_idx) * 2 + (norm == NormMode::FirstComponent) as usize
    }

    /// Adds the contribution of one occupied set to the slots of `n_idx`.
    #[inline]
    pub(crate) fn record(&self, n_idx: usize, sites: &[Site], d: usize, out: &mut [f64]) {
        let base = n_idx * self.s_list.len() * 2;
        for x in sites {
            let r2 = x.norm2(d);
            let x1 = x.0[0];
            for (si, &s) in self.s_list.iter().enumerate() {
                out[base + 2 * si] += norm_pow(r2, s);
                out[base + 2 * si + 1] += abs_pow(x1, s);
            }
        }
    }

    /// Assembles rows from merged accumulators.
    pub(crate) fn rows(&self, acc: &[Accumulator], time_of: impl Fn(u64) -> f64) -> Vec<MomentRow> {
        let mut rows = Vec::with_capacity(self.len());
        for (ni, &n) in self.n_list.iter().enumerate() {
            for (si, &s) in self.s_list.iter().enumerate() {
                for norm in [NormMode::Euclidean, NormMode::FirstComponent] {
                    let a = &acc[self.slot(ni, si, norm)];
                    rows.push(MomentRow {
                        time: time_of(n),
                        s,
                        norm,
                        mean: a.mean(),
                        stderr: a.stderr(),
                        samples: a.count,
                    });
                }
            }
        }
        rows
    }
}

/// Per-cluster statistics: `values[slot]` is `sum_{x in F_n} |x|^s` (or
/// `|x_1|^s`) for the requested `(n, s, norm)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterStats {
    pub values: Vec<f64>,
    /// `|F_n|` at each requested generation.
    pub sizes: Vec<u64>,
    /// Generation at which the frontier first became empty, if it did.
    pub extinct_at: Option<u64>,
    /// Set when the frontier exceeded the size cap and growth was stopped.
    pub capped: bool,
}

pub(crate) fn simulate_cluster<R: Rng + ?Sized>(
    stepper: &Stepper,
    horizon: u64,
    req: &MomentRequest,
    cap: Option<usize>,
    rng: &mut R,
    values: &mut [f64],
    sizes: &mut [u64],
) -> Result<(Option<u64>, bool)> {
    values.iter_mut().for_each(|v| *v = 0.0);
    sizes.iter_mut().for_each(|v| *v = 0);
    let d = stepper.kernel.dim();
    let range = stepper.kernel.range();
    let mut cur = vec![Site::ORIGIN];
    let mut next = Vec::new();
    let mut ni = 0;
    let last = *req.n_list.last().expect("non-empty request");
    let end = horizon.min(last);
    for n in 0..=end {
        debug_assert!(cur.iter().all(|x| x.sup_norm(d) <= n as i64 * range));
        if ni < req.n_list.len() && req.n_list[ni] == n {
            req.record(ni, &cur, d, values);
            sizes[ni] = cur.len() as u64;
            ni += 1;
        }
        if n == end {
            break;
        }
        stepper.step_into(&cur, &mut next, n, rng)?;
        std::mem::swap(&mut cur, &mut next);
        if cur.is_empty() {
            return Ok((Some(n + 1), false));
        }
        if cap.is_some_and(|c| cur.len() > c) {
            return Ok((None, true));
        }
    }
    Ok((None, false))
}

/// Grows one cluster from `F_0 = {0}` and records the requested statistics.
pub fn run_cluster<R: Rng + ?Sized>(
    cfg: &EvolutionConfig,
    rng: &mut R,
    s_list: &[f64],
    n_list: &[u64],
) -> Result<ClusterStats> {
    let req = MomentRequest::new(s_list, n_list)?;
    if let Some(&n) = req.n_list.iter().find(|&&n| n > cfg.horizon) {
        return Err(Error::InvalidConfig(format!("generation {n} beyond horizon {}", cfg.horizon)));
    }
    let stepper = Stepper::new(cfg)?;
    let mut values = vec![0.0; req.len()];
    let mut sizes = vec![0; req.n_list.len()];
    let (extinct_at, capped) =
        simulate_cluster(&stepper, cfg.horizon, &req, None, rng, &mut values, &mut sizes)?;
    Ok(ClusterStats { values, sizes, extinct_at, capped })
}

/// Accumulators of one chunk of clusters, or `None` when a cluster hit the cap.
pub(crate) fn chunk_accumulators(
    stepper: &Stepper,
    horizon: u64,
    req: &MomentRequest,
    stream_seed: u64,
    range: std::ops::Range<u64>,
    cap: Option<usize>,
) -> Result<Option<Vec<Accumulator>>> {
    let mut acc = vec![Accumulator::default(); req.len()];
    let mut values = vec![0.0; req.len()];
    let mut sizes = vec![0; req.n_list.len()];
    for idx in range {
        let mut rng = sample_stream(stream_seed, idx);
        let (_, capped) = simulate_cluster(stepper, horizon, req, cap, &mut rng, &mut values, &mut sizes)?;
        if capped {
            return Ok(None);
        }
        for (a, &v) in acc.iter_mut().zip(&values) {
            a.push(v);
        }
    }
    Ok(Some(acc))
}

pub(crate) fn merge_all<'a>(len: usize, chunks: impl IntoIterator<Item = &'a Vec<Accumulator>>) -> Vec<Accumulator> {
    let mut total = vec![Accumulator::default(); len];
    for c in chunks {
        for (t, a) in total.iter_mut().zip(c) {
            t.merge(a);
        }
    }
    total
}

/// Unbiased estimates of `m_s(n)` from `cfg.samples` independent clusters.
/// Every row is computed from the same clusters.
pub fn estimate_moments(
    cfg: &EvolutionConfig,
    s_list: &[f64],
    n_list: &[u64],
    exec: &Execution,
) -> Result<MomentTable> {
    if cfg.samples == 0 {
        return Err(Error::InvalidConfig("samples must be positive".into()));
    }
    let req = MomentRequest::new(s_list, n_list)?;
    if let Some(&n) = req.n_list.iter().find(|&&n| n > cfg.horizon) {
        return Err(Error::InvalidConfig(format!("generation {n} beyond horizon {}", cfg.horizon)));
    }
    let stepper = Stepper::new(cfg)?;
    let stream_seed = derive_seed(cfg.seed, TAG_CLUSTERS);
    let chunks = exec.map_chunks(cfg.samples, |_, range| {
        chunk_accumulators(&stepper, cfg.horizon, &req, stream_seed, range, None)
    });
    let chunks: Vec<Vec<Accumulator>> =
        chunks.into_iter().map(|c| c.map(|a| a.expect("no cap"))).collect::<Result<_>>()?;
    let total = merge_all(req.len(), &chunks);
    Ok(MomentTable { provenance: cfg.provenance(), rows: req.rows(&total, |n| n as f64) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_kernel, KernelSpec};
    use crate::rng::sample_stream;

    fn cfg(d: usize, l: i64, p: f64, eps: f64, horizon: u64) -> EvolutionConfig {
        let k = Arc::new(build_kernel(KernelSpec::uniform(d, l)).unwrap());
        EvolutionConfig::new(k, p, eps, horizon)
    }

    #[test]
    fn empty_frontier_is_absorbing() {
        let c = cfg(2, 1, 2.0, 1.0, 5);
        let f = Frontier { generation: 3, sites: vec![] };
        let g = step(&f, &c, &mut sample_stream(1, 0)).unwrap();
        assert!(g.is_empty());
        assert_eq!(g.generation, 4);
    }

    #[test]
    fn zero_intensity_dies() {
        let c = cfg(1, 1, 0.0, 1.0, 5);
        for i in 0..100 {
            let g = step(&Frontier::origin(), &c, &mut sample_stream(3, i)).unwrap();
            assert!(g.is_empty());
        }
    }

    #[test]
    fn one_step_law_chi_square() {
        // Two independent Bernoulli(1/2) bonds: four outcomes of mass 1/4.
        let c = cfg(1, 1, 1.0, 1.0, 1);
        let stepper = Stepper::new(&c).unwrap();
        let trials = 100_000u64;
        let mut counts = [0u64; 4];
        let mut next = Vec::new();
        for i in 0..trials {
            stepper.step_into(&[Site::ORIGIN], &mut next, 0, &mut sample_stream(11, i)).unwrap();
            let has = |v: i64| next.contains(&Site::from_coords(&[v]));
            counts[has(-1) as usize + 2 * has(1) as usize] += 1;
        }
        let e = trials as f64 / 4.0;
        let chi2: f64 = counts.iter().map(|&o| (o as f64 - e).powi(2) / e).sum();
        // 3 degrees of freedom, 0.999 quantile
        assert!(chi2 < 16.27, "chi2 = {chi2}, counts = {counts:?}");
    }

    #[test]
    fn temporal_bonds_keep_sites() {
        let c = cfg(1, 1, 0.0, 0.25, 10);
        let stepper = Stepper::new(&c).unwrap();
        let mut kept = 0;
        let mut next = Vec::new();
        for i in 0..20_000 {
            stepper.step_into(&[Site::ORIGIN], &mut next, 0, &mut sample_stream(5, i)).unwrap();
            assert!(next.len() <= 1);
            kept += next.len();
        }
        let frac = kept as f64 / 20_000.0;
        assert!((frac - 0.75).abs() < 4.0 * (0.75f64 * 0.25 / 20_000.0).sqrt());
    }

    #[test]
    fn reachability_bound() {
        let c = cfg(2, 2, 3.0, 1.0, 30);
        let stepper = Stepper::new(&c).unwrap();
        let mut rng = sample_stream(2, 0);
        let mut cur = vec![Site::ORIGIN];
        let mut next = Vec::new();
        for n in 0..30u64 {
            stepper.step_into(&cur, &mut next, n, &mut rng).unwrap();
            std::mem::swap(&mut cur, &mut next);
            assert!(cur.iter().all(|x| x.sup_norm(2) <= (n as i64 + 1) * 2));
            assert!(cur.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn invariant_violations_are_rejected() {
        // p * max D > 1 with eps = 1
        assert!(Stepper::new(&cfg(1, 1, 2.5, 1.0, 5)).is_err());
        assert!(Stepper::new(&cfg(1, 1, 2.0, 1.0, 5)).is_ok());
        assert!(Stepper::new(&cfg(1, 1, 1.0, 0.0, 5)).is_err());
        assert!(Stepper::new(&cfg(1, 1, 1.0, 1.5, 5)).is_err());
        assert!(Stepper::new(&cfg(1, 1, 1.0, 1.0, u64::MAX / 2)).is_err());
        let c = cfg(1, 1, 1.0, 1.0, 5).with_samples(0);
        assert!(estimate_moments(&c, &[0.0], &[1], &Execution::sequential()).is_err());
    }

    #[test]
    fn run_cluster_origin_contributions() {
        let c = cfg(3, 1, 1.0, 1.0, 4);
        let st = run_cluster(&c, &mut sample_stream(0, 0), &[0.0, 2.0], &[0]).unwrap();
        assert_eq!(st.values, vec![1.0, 1.0, 0.0, 0.0]);
        assert_eq!(st.sizes, vec![1]);
        assert!(run_cluster(&c, &mut sample_stream(0, 0), &[0.0], &[5]).is_err());
    }

    #[test]
    fn first_generation_mean_size() {
        let c = cfg(1, 1, 1.0, 1.0, 2).with_samples(40_000).with_seed(99);
        let t = estimate_moments(&c, &[0.0, 2.0], &[0, 1], &Execution::workers(2)).unwrap();
        let r0 = t.row(0.0, 0.0, NormMode::Euclidean).unwrap();
        assert_eq!((r0.mean, r0.stderr), (1.0, 0.0));
        for s in [0.0, 2.0] {
            let r = t.row(1.0, s, NormMode::Euclidean).unwrap();
            assert!((r.mean - 1.0).abs() < 4.0 * r.stderr, "{r:?}");
        }
        assert!(t.rows.iter().all(|r| r.samples == 40_000));
    }

    #[test]
    fn weighted_kernel_path_matches_one_step_moment() {
        use crate::kernel::Profile;
        let tent = Profile::Custom {
            name: "tent".into(),
            h: Arc::new(|u: &[f64]| u.iter().map(|c| 1.5 - c.abs()).product()),
        };
        let k = Arc::new(build_kernel(KernelSpec { d: 2, range: 2, profile: tent }).unwrap());
        let sigma2 = k.sigma2();
        let c = EvolutionConfig::new(k, 1.0, 1.0, 1).with_samples(40_000).with_seed(4);
        let t = estimate_moments(&c, &[0.0, 2.0], &[1], &Execution::sequential()).unwrap();
        let r0 = t.row(1.0, 0.0, NormMode::Euclidean).unwrap();
        let r2 = t.row(1.0, 2.0, NormMode::Euclidean).unwrap();
        assert!((r0.mean - 1.0).abs() < 4.0 * r0.stderr);
        assert!((r2.mean - sigma2).abs() < 4.0 * r2.stderr);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let c = cfg(2, 1, 1.0, 0.5, 12).with_samples(3000).with_seed(17);
        let n: Vec<u64> = (0..=12).collect();
        let a = estimate_moments(&c, &[0.0, 2.0, 4.0], &n, &Execution::sequential()).unwrap();
        let b = estimate_moments(&c, &[0.0, 2.0, 4.0], &n, &Execution::workers(8)).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
    }
}
