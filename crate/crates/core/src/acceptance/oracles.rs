//! Reference values computed independently of the library's algorithms.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use crate::kernel::Kernel;
use crate::lattice::Site;

/// `tau_2(2)` and `tau_2(0)` for `d = 1, L = 1, eps = 1, p = 1` by hand: the
/// only path to 2 is 0 -> 1 -> 2; `F_1` is `{-1}`, `{1}` or `{-1, 1}` with
/// probability 1/4 each and reaches 0 with probability 1/2, 1/2, 3/4.
pub const TAU_2_AT_2: f64 = 0.25;
pub const TAU_2_AT_0: f64 = 0.25 * 0.5 + 0.25 * 0.5 + 0.25 * 0.75;

/// `pi_2(0) = tau_2(0) - (q * tau_1)(0)` with `(q * tau_1)(0) = 1/2`.
pub const PI_2_AT_0: f64 = TAU_2_AT_0 - 0.5;

/// One-dimensional nearest-neighbour trees are intervals containing 0.
pub fn interval_t1(n: u32) -> f64 {
    (n as f64 + 1.0) * 0.5f64.powi(n as i32)
}

pub fn interval_t2(x: i64, n: u32, big_n: u32) -> f64 {
    let ax = x.unsigned_abs() as u32;
    if n != ax || big_n < ax {
        0.0
    } else {
        (big_n - ax + 1) as f64 * 0.5f64.powi(big_n as i32)
    }
}

/// Trees containing the origin, built level by level as sets of sorted bond
/// lists. Returns `(counts, t1, t2)` with `t2` keyed by `(x, n, N)`.
pub fn slow_trees(k: &Kernel, n_max: usize) -> (Vec<u64>, Vec<f64>, HashMap<(Site, u32, u32), f64>) {
    let d = k.dim();
    let mut level: HashSet<Vec<(Site, Site)>> = HashSet::from([vec![]]);
    let mut counts = vec![1u64];
    let mut t1 = vec![1.0];
    let mut t2 = HashMap::from([((Site::ORIGIN, 0, 0), 1.0)]);
    for big_n in 1..=n_max {
        let mut next = HashSet::new();
        for tree in &level {
            let verts: BTreeSet<Site> = tree.iter().flat_map(|(a, b)| [*a, *b]).chain([Site::ORIGIN]).collect();
            for v in &verts {
                for off in k.support() {
                    let w = v.checked_add(off, d).expect("small trees");
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
        let mut w_sum = 0.0;
        for tree in &next {
            let w: f64 = tree.iter().map(|(a, b)| k.prob_at(&b.sub(a, d))).product();
            w_sum += w;
            for (x, n) in path_lengths(tree) {
                *t2.entry((x, n, big_n as u32)).or_insert(0.0) += w;
            }
        }
        counts.push(next.len() as u64);
        t1.push(w_sum);
        level = next;
    }
    (counts, t1, t2)
}

/// Breadth-first distances from the origin inside a tree.
fn path_lengths(tree: &[(Site, Site)]) -> Vec<(Site, u32)> {
    let mut adj: HashMap<Site, Vec<Site>> = HashMap::new();
    for (a, b) in tree {
        adj.entry(*a).or_default().push(*b);
        adj.entry(*b).or_default().push(*a);
    }
    let mut dist = HashMap::from([(Site::ORIGIN, 0u32)]);
    let mut queue = VecDeque::from([Site::ORIGIN]);
    while let Some(v) = queue.pop_front() {
        let dv = dist[&v];
        for w in adj.get(&v).into_iter().flatten() {
            if !dist.contains_key(w) {
                dist.insert(*w, dv + 1);
                queue.push_back(*w);
            }
        }
    }
    dist.into_iter().collect()
}

/// `E m_0` of the discretized process at `p = 0`: the origin survives each
/// generation with probability `1 - eps`.
pub fn frozen_discrete_mass(eps: f64, n: u64) -> f64 {
    (1.0 - eps).powi(n as i32)
}

pub fn frozen_continuous_mass(t: f64) -> f64 {
    (-t).exp()
}
