//! Exhaustive enumeration of lattice trees containing the origin.
//!
//! Trees are generated by reverse search: the parent of a tree is the tree
//! with its largest non-origin leaf removed, so each tree is reached from
//! exactly one parent by exactly one extension and no deduplication table is
//! needed.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{norm_pow, Kernel};
use crate::lattice::Site;

pub const DEFAULT_TREE_BUDGET: u128 = 200_000_000;

#[derive(Debug, Clone)]
pub struct TreeTable {
    pub d: usize,
    pub range: i64,
    pub n_max: usize,
    /// Number of `N`-bond trees, i.e. the weights with `D` replaced by 1.
    pub counts: Vec<u64>,
    /// `t1[N] = sum_{|T| = N} prod_{bonds} D(x - y)`.
    pub t1: Vec<f64>,
    /// `(x, n, N) -> t_N^{(2)}(x; n)` where `n` is the backbone length from 0 to `x`.
    pub t2: BTreeMap<(Site, u32, u32), f64>,
}

struct Search<'a> {
    kernel: &'a Kernel,
    n_max: usize,
    budget: u128,
    visited: u128,
    verts: Vec<Site>,
    depth: Vec<u32>,
    degree: Vec<u32>,
    counts: Vec<u64>,
    t1: Vec<f64>,
    t2: HashMap<(Site, u32, u32), f64>,
}

impl Search<'_> {
    fn record(&mut self, weight: f64) -> Result<()> {
        self.visited += 1;
        if self.visited > self.budget {
            return Err(Error::BudgetExceeded { what: "lattice-tree enumeration", needed: self.visited, budget: self.budget });
        }
        let bonds = self.verts.len() - 1;
        self.counts[bonds] += 1;
        self.t1[bonds] += weight;
        for (x, &n) in self.verts.iter().zip(&self.depth) {
            *self.t2.entry((*x, n, bonds as u32)).or_insert(0.0) += weight;
        }
        Ok(())
    }

    fn grow(&mut self, weight: f64) -> Result<()> {
        self.record(weight)?;
        if self.verts.len() - 1 == self.n_max {
            return Ok(());
        }
        let d = self.kernel.dim();
        for v in 0..self.verts.len() {
            // Largest non-origin leaf other than v; the new leaf must beat it.
            let bound = (1..self.verts.len())
                .filter(|&u| u != v && self.degree[u] == 1)
                .map(|u| self.verts[u])
                .max();
            for (off, &pr) in self.kernel.support().iter().zip(self.kernel.probabilities()) {
                let w = self.verts[v].checked_add(off, d).expect("small trees");
                if bound.is_some_and(|b| w <= b) || self.verts.contains(&w) {
                    continue;
                }
                self.verts.push(w);
                self.depth.push(self.depth[v] + 1);
                self.degree.push(1);
                self.degree[v] += 1;
                let r = self.grow(weight * pr);
                self.degree[v] -= 1;
                self.verts.pop();
                self.depth.pop();
                self.degree.pop();
                r?;
            }
        }
        Ok(())
    }
}

pub fn enumerate_lattice_trees(kernel: &Kernel, n_max: usize) -> Result<TreeTable> {
    enumerate_lattice_trees_with_budget(kernel, n_max, DEFAULT_TREE_BUDGET)
}

pub fn enumerate_lattice_trees_with_budget(kernel: &Kernel, n_max: usize, budget: u128) -> Result<TreeTable> {
    let mut s = Search {
        kernel,
        n_max,
        budget,
        visited: 0,
        verts: vec![Site::ORIGIN],
        depth: vec![0],
        degree: vec![0],
        counts: vec![0; n_max + 1],
        t1: vec![0.0; n_max + 1],
        t2: HashMap::new(),
    };
    s.grow(1.0)?;
    Ok(TreeTable {
        d: kernel.dim(),
        range: kernel.range(),
        n_max,
        counts: s.counts,
        t1: s.t1,
        t2: s.t2.into_iter().collect(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TreeMoment {
    pub s: f64,
    pub n: u32,
    /// `sum_x |x|^s sum_{N <= n_max} t_N^{(2)}(x; n) p^N`.
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LtSeriesStats {
    pub p: f64,
    /// Highest `N` included in every truncated sum.
    pub truncation_order: usize,
    /// `g_partial[N] = sum_{k <= N} t1[k] p^k`.
    pub g_partial: Vec<f64>,
    pub g_p: f64,
    /// `t1[N] / t1[N + 1]`.
    pub ratios: Vec<f64>,
    pub p_c_estimate: f64,
    pub moments: Vec<TreeMoment>,
}

pub fn lt_series_stats(tree: &TreeTable, p: f64, s_list: &[f64]) -> Result<LtSeriesStats> {
    if !(p >= 0.0) || !p.is_finite() {
        return Err(Error::InvalidConfig(format!("p = {p} must be finite and non-negative")));
    }
    let mut g_partial = Vec::with_capacity(tree.n_max + 1);
    let mut acc = 0.0;
    for (n, t) in tree.t1.iter().enumerate() {
        acc += t * p.powi(n as i32);
        g_partial.push(acc);
    }
    let ratios: Vec<f64> = tree.t1.windows(2).map(|w| w[0] / w[1]).collect();
    let p_c_estimate = ratios.last().copied().unwrap_or(f64::NAN);
    let mut moments = Vec::new();
    for &s in s_list {
        let mut by_n = vec![0.0; tree.n_max + 1];
        for ((x, n, big_n), w) in &tree.t2 {
            by_n[*n as usize] += norm_pow(x.norm2(tree.d), s) * w * p.powi(*big_n as i32);
        }
        moments.extend(by_n.into_iter().enumerate().map(|(n, value)| TreeMoment { s, n: n as u32, value }));
    }
    Ok(LtSeriesStats { p, truncation_order: tree.n_max, g_p: acc, g_partial, ratios, p_c_estimate, moments })
}

#[derive(Serialize)]
struct T2Entry {
    x: Vec<i64>,
    n: u32,
    #[serde(rename = "N")]
    bonds: u32,
    weight: f64,
}

#[derive(Serialize)]
struct TreeJson<'a> {
    d: usize,
    #[serde(rename = "L")]
    range: i64,
    n_max: usize,
    counts: &'a [u64],
    t1: &'a [f64],
    t2: Vec<T2Entry>,
}

impl Serialize for TreeTable {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let t2 = self
            .t2
            .iter()
            .map(|((x, n, b), w)| T2Entry { x: x.coords(self.d).to_vec(), n: *n, bonds: *b, weight: *w })
            .collect();
        TreeJson { d: self.d, range: self.range, n_max: self.n_max, counts: &self.counts, t1: &self.t1, t2 }
            .serialize(ser)
    }
}

#[cfg(test)]
mod tests {
    use std::collections::{BTreeSet, HashSet};

    use super::*;
    use crate::kernel::{build_kernel, KernelSpec};
    use crate::lattice::signed_permutations;

    #[test]
    fn intervals_in_one_dimension() {
        let k = build_kernel(KernelSpec::uniform(1, 1)).unwrap();
        let t = enumerate_lattice_trees(&k, 8).unwrap();
        for n in 0..=8usize {
            assert_eq!(t.counts[n], n as u64 + 1);
            assert_eq!(t.t1[n], (n as f64 + 1.0) * 0.5f64.powi(n as i32));
        }
        for ((x, n, big_n), w) in &t.t2 {
            let ax = x.0[0].unsigned_abs() as u32;
            assert_eq!(*n, ax);
            assert_eq!(*w, (*big_n - ax + 1) as f64 * 0.5f64.powi(*big_n as i32));
        }
        // every (x, N) with |x| <= N appears
        assert_eq!(t.t2.len(), (0..=8).map(|n| 2 * n + 1).sum::<usize>());
    }

    #[test]
    fn series_statistics() {
        let k = build_kernel(KernelSpec::uniform(1, 1)).unwrap();
        let t = enumerate_lattice_trees(&k, 8).unwrap();
        let st = lt_series_stats(&t, 1.0, &[0.0, 2.0]).unwrap();
        assert!(st.g_partial.windows(2).all(|w| w[1] > w[0] && w[1] < 4.0));
        // tail of sum (N+1) 2^-N beyond N = 8 is 11 / 2^8
        assert!((st.g_p - (4.0 - 11.0 / 256.0)).abs() < 1e-12);
        assert!(st.ratios.windows(2).all(|w| w[1] > w[0]));
        assert!((st.p_c_estimate - 2.0 * 8.0 / 9.0).abs() < 1e-12);
        assert_eq!(lt_series_stats(&t, 0.0, &[]).unwrap().g_p, 1.0);
        // s = 0, n = 0: x = 0 in every tree
        let m00 = st.moments.iter().find(|m| m.s == 0.0 && m.n == 0).unwrap();
        assert!((m00.value - st.g_p).abs() < 1e-12);
    }

    /// Trees level by level as sets of sorted bond lists.
    fn slow_counts(k: &Kernel, n_max: usize) -> Vec<u64> {
        let d = k.dim();
        let mut level: HashSet<Vec<(Site, Site)>> = HashSet::from([vec![]]);
        let mut out = vec![1];
        for _ in 0..n_max {
            let mut next = HashSet::new();
            for tree in &level {
                let verts: BTreeSet<Site> = tree.iter().flat_map(|(a, b)| [*a, *b]).chain([Site::ORIGIN]).collect();
                for v in &verts {
                    for off in k.support() {
                        let w = v.checked_add(off, d).unwrap();
                        if verts.contains(&w) {
                            continue;
                        }
                        let mut t = tree.clone();
                        t.push(if *v < w { (*v, w) } else { (w, *v) });
                        t.sort();
                        next.insert(t);
                    }
                }
            }
            out.push(next.len() as u64);
            level = next;
        }
        out
    }

    #[test]
    fn two_dimensions_against_slow_counter() {
        let k = build_kernel(KernelSpec::uniform(2, 1)).unwrap();
        let t = enumerate_lattice_trees(&k, 4).unwrap();
        assert_eq!(t.counts, slow_counts(&k, 4));
        assert_eq!(t.counts[1], 8);
        for (n, c) in t.counts.iter().enumerate() {
            assert!((t.t1[n] - *c as f64 / 8f64.powi(n as i32)).abs() < 1e-12 * t.t1[n]);
        }
        for ((x, n, big_n), w) in &t.t2 {
            assert!(*w <= t.t1[*big_n as usize] * (1.0 + 1e-12));
            assert!(*n as usize <= *big_n as usize);
            for (perm, flip) in signed_permutations(2) {
                let y = x.signed_permute(&perm, &flip);
                assert!((t.t2[&(y, *n, *big_n)] - w).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn budget() {
        let k = build_kernel(KernelSpec::uniform(2, 1)).unwrap();
        assert!(matches!(enumerate_lattice_trees_with_budget(&k, 4, 100), Err(Error::BudgetExceeded { .. })));
    }
}
