//! Exact two-point function of oriented percolation by dynamic programming
//! over the full distribution of the frontier.
//!
//! Frontiers at generation `n` are bitmasks over the box of radius `nL`.
//! Given `F_n = S`, the sites of `F_{n+1}` are independent with occupation
//! `o_y(S) = 1 - prod_{x in S} (1 - b(y - x))`. The last two generations
//! never need the joint law: `tau_{n+1}(y) = E[1 - prod_x (1 - o_x b(y - x))]`
//! conditionally on `F_{n-1}`, again by independence.

use std::collections::HashMap;

use num_rational::BigRational;
use num_traits::{Num, One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::field::Field;
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::lattice::{box_index, box_points, Site};

/// Highest `j` kept in the moment arrays.
pub const MOMENT_ORDERS: u32 = 4;

/// Default limit on `sum_n 2^{|box_n|}` over the generations whose joint law
/// is built.
pub const DEFAULT_BUDGET: u128 = 1 << 24;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExactConfig {
    pub d: usize,
    #[serde(rename = "L")]
    pub range: i64,
    pub profile: String,
    pub p: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwoPointTable {
    pub config: ExactConfig,
    pub n_max: usize,
    /// One-step kernel `q = (1 - eps) delta_0 + eps p D` on the box of radius `L`.
    pub q: Field,
    /// `tau[n]` lives on the box of radius `nL`.
    pub tau: Vec<Field>,
    /// `|sum_S P(F_n = S) - 1|` for each generation whose law was built.
    pub mass_error: Vec<f64>,
    /// `axis[j][n] = sum_x x_1^{2j} tau_n(x)`.
    pub axis: Vec<Vec<f64>>,
    /// `euclid[j][n] = sum_x |x|^{2j} tau_n(x)`.
    pub euclid: Vec<Vec<f64>>,
}

fn one_step(kernel: &Kernel, p: f64, eps: f64) -> Field {
    let d = kernel.dim();
    let mut q = Field::zeros(d, kernel.range());
    q.set(&Site::ORIGIN, 1.0 - eps);
    for (x, &pr) in kernel.support().iter().zip(kernel.probabilities()) {
        q.add_at(x, eps * p * pr);
    }
    q
}

fn check_params(kernel: &Kernel, p: f64, eps: f64, n_max: usize) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidConfig(format!("eps = {eps} must lie in (0, 1]")));
    }
    if !(p >= 0.0) || !p.is_finite() {
        return Err(Error::InvalidConfig(format!("p = {p} must be finite and non-negative")));
    }
    if eps * p * kernel.max_prob() > 1.0 + 1e-12 {
        return Err(Error::InvalidConfig(format!("eps p D(x) exceeds 1 at p = {p}")));
    }
    if n_max == 0 {
        return Err(Error::InvalidConfig("n_max must be at least 1".into()));
    }
    Ok(())
}

fn box_size(d: usize, radius: i64) -> u128 {
    ((2 * radius + 1) as u128).pow(d as u32)
}

/// Work estimate of the joint-law part of the program.
pub fn exact_cost(d: usize, range: i64, n_max: usize) -> u128 {
    let mut total: u128 = 0;
    for n in 1..n_max.saturating_sub(1) {
        let sites = box_size(d, n as i64 * range);
        if sites >= 64 {
            return u128::MAX;
        }
        total = total.saturating_add(1u128 << sites);
    }
    total
}

/// Bond weights `b` with exact values in `T`.
struct Bonds<T> {
    d: usize,
    offsets: Vec<Site>,
    weights: Vec<T>,
}

/// Occupation probabilities of the next generation on the box of radius
/// `radius_next`, given the occupied sites.
fn occupation<T: Num + Clone>(bonds: &Bonds<T>, occupied: &[(Site, T)], radius_next: i64) -> Vec<T> {
    let size = box_size(bonds.d, radius_next) as usize;
    let mut keep = vec![T::one(); size];
    for (x, ox) in occupied {
        for (off, b) in bonds.offsets.iter().zip(&bonds.weights) {
            let y = x.checked_add(off, bonds.d).expect("small boxes");
            let i = box_index(&y, bonds.d, radius_next).expect("reachable set");
            keep[i] = keep[i].clone() * (T::one() - ox.clone() * b.clone());
        }
    }
    keep.into_iter().map(|k| T::one() - k).collect()
}

/// The frontier program in arbitrary exact or floating arithmetic. Returns
/// `tau_n` as dense vectors over the box of radius `nL` and the mass of each
/// joint law built.
fn frontier_program<T: Num + Clone>(
    bonds: &Bonds<T>,
    range: i64,
    n_max: usize,
    budget: u128,
) -> Result<(Vec<Vec<T>>, Vec<T>)> {
    let d = bonds.d;
    let needed = exact_cost(d, range, n_max);
    if needed > budget {
        return Err(Error::BudgetExceeded { what: "frontier distribution", needed, budget });
    }
    let mut tau: Vec<Vec<T>> = Vec::with_capacity(n_max + 1);
    let mut masses = Vec::new();
    // Law of F_n as (mask, probability), sorted by mask.
    let mut law: Vec<(u64, T)> = vec![(1, T::one())];
    let mut points = box_points(d, 0);
    tau.push(vec![T::one()]);
    let mut n = 0;
    while n < n_max {
        let r_next = (n as i64 + 1) * range;
        let points_next = box_points(d, r_next);
        let sites_of = |mask: u64| -> Vec<(Site, T)> {
            (0..points.len()).filter(|i| mask >> i & 1 == 1).map(|i| (points[i], T::one())).collect()
        };
        if n + 3 <= n_max {
            // Build the joint law of F_{n+1}.
            let mut next: HashMap<u64, T> = HashMap::new();
            let mut marginal = vec![T::zero(); points_next.len()];
            for (mask, prob) in &law {
                let occ = occupation(bonds, &sites_of(*mask), r_next);
                let mut forced = 0u64;
                let mut free: Vec<(usize, T)> = Vec::new();
                for (i, o) in occ.into_iter().enumerate() {
                    if o.is_zero() {
                        continue;
                    }
                    marginal[i] = marginal[i].clone() + prob.clone() * o.clone();
                    if o.is_one() {
                        forced |= 1 << i;
                    } else {
                        free.push((i, o));
                    }
                }
                let mut branches: Vec<(u64, T)> = vec![(forced, prob.clone())];
                for (i, o) in &free {
                    let mut grown = Vec::with_capacity(branches.len() * 2);
                    for (m, w) in branches {
                        grown.push((m | 1 << i, w.clone() * o.clone()));
                        grown.push((m, w * (T::one() - o.clone())));
                    }
                    branches = grown;
                }
                for (m, w) in branches {
                    let e = next.entry(m).or_insert_with(T::zero);
                    *e = e.clone() + w;
                }
            }
            let mut sorted: Vec<(u64, T)> = next.into_iter().collect();
            sorted.sort_by_key(|(m, _)| *m);
            let mass = sorted.iter().fold(T::zero(), |a, (_, w)| a + w.clone());
            masses.push(mass);
            tau.push(marginal);
            law = sorted;
            points = points_next;
            n += 1;
        } else if n + 2 <= n_max {
            // Marginals of the last two generations from the law of F_n.
            let r_last = r_next + range;
            let points_last = box_points(d, r_last);
            let mut m1 = vec![T::zero(); points_next.len()];
            let mut m2 = vec![T::zero(); points_last.len()];
            for (mask, prob) in &law {
                let occ = occupation(bonds, &sites_of(*mask), r_next);
                let weighted: Vec<(Site, T)> = points_next
                    .iter()
                    .zip(&occ)
                    .filter(|(_, o)| !o.is_zero())
                    .map(|(y, o)| (*y, o.clone()))
                    .collect();
                for (i, o) in occ.iter().enumerate() {
                    m1[i] = m1[i].clone() + prob.clone() * o.clone();
                }
                let occ2 = occupation(bonds, &weighted, r_last);
                for (i, o) in occ2.into_iter().enumerate() {
                    m2[i] = m2[i].clone() + prob.clone() * o;
                }
            }
            tau.push(m1);
            tau.push(m2);
            n += 2;
        } else {
            // n_max = 1.
            let mut m1 = vec![T::zero(); points_next.len()];
            for (mask, prob) in &law {
                let occ = occupation(bonds, &sites_of(*mask), r_next);
                for (i, o) in occ.into_iter().enumerate() {
                    m1[i] = m1[i].clone() + prob.clone() * o;
                }
            }
            tau.push(m1);
            n += 1;
        }
    }
    Ok((tau, masses))
}

fn float_bonds(q: &Field) -> Bonds<f64> {
    let mut offsets = Vec::new();
    let mut weights = Vec::new();
    for (x, &v) in q.points().iter().zip(&q.values) {
        if v != 0.0 {
            offsets.push(*x);
            weights.push(v);
        }
    }
    Bonds { d: q.d, offsets, weights }
}

fn exact_ratio(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite")
}

fn rational_bonds(kernel: &Kernel, p: f64, eps: f64) -> Bonds<BigRational> {
    let eps_r = exact_ratio(eps);
    let p_r = exact_ratio(p);
    let m = kernel.support().len();
    // The uniform box mass is 1/m exactly; other profiles use their doubles.
    let mass = |pr: f64| {
        if kernel.is_uniform() {
            BigRational::new(1.into(), (m as u64).into())
        } else {
            exact_ratio(pr)
        }
    };
    let mut offsets = Vec::new();
    let mut weights = Vec::new();
    let stay = BigRational::one() - eps_r.clone();
    if !stay.is_zero() {
        offsets.push(Site::ORIGIN);
        weights.push(stay);
    }
    for (x, &pr) in kernel.support().iter().zip(kernel.probabilities()) {
        let w = eps_r.clone() * p_r.clone() * mass(pr);
        if !w.is_zero() {
            offsets.push(*x);
            weights.push(w);
        }
    }
    Bonds { d: kernel.dim(), offsets, weights }
}

fn moment_arrays(tau: &[Field]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let axis = (0..=MOMENT_ORDERS).map(|j| tau.iter().map(|t| t.axis_moment(j)).collect()).collect();
    let euclid = (0..=MOMENT_ORDERS).map(|j| tau.iter().map(|t| t.euclid_moment(j)).collect()).collect();
    (axis, euclid)
}

fn config_of(kernel: &Kernel, p: f64, eps: f64) -> ExactConfig {
    ExactConfig { d: kernel.dim(), range: kernel.range(), profile: kernel.spec().profile.name().to_string(), p, eps }
}

impl TwoPointTable {
    fn assemble(kernel: &Kernel, p: f64, eps: f64, q: Field, tau: Vec<Field>, mass_error: Vec<f64>) -> TwoPointTable {
        let (axis, euclid) = moment_arrays(&tau);
        TwoPointTable { config: config_of(kernel, p, eps), n_max: tau.len() - 1, q, tau, mass_error, axis, euclid }
    }

    /// `tau_n = q^{*n}`: the table of a walk with no interaction.
    pub fn random_walk(kernel: &Kernel, p: f64, eps: f64, n_max: usize) -> Result<TwoPointTable> {
        check_params(kernel, p, eps, n_max)?;
        let q = one_step(kernel, p, eps);
        let mut tau = vec![Field::delta(kernel.dim(), 0)];
        for n in 1..=n_max {
            let next = tau[n - 1].convolve(&q, n as i64 * kernel.range());
            tau.push(next);
        }
        Ok(Self::assemble(kernel, p, eps, q, tau, Vec::new()))
    }

    pub fn d(&self) -> usize {
        self.config.d
    }

    pub fn range(&self) -> i64 {
        self.config.range
    }

    pub fn tau_at(&self, n: usize, x: &Site) -> f64 {
        self.tau[n].get(x)
    }

    /// `tau_n` on the box of radius `n_max L`.
    pub fn tau_wide(&self, n: usize) -> Field {
        self.tau[n].widen(self.n_max as i64 * self.range())
    }
}

pub fn exact_two_point(kernel: &Kernel, p: f64, eps: f64, n_max: usize) -> Result<TwoPointTable> {
    exact_two_point_with_budget(kernel, p, eps, n_max, DEFAULT_BUDGET)
}

pub fn exact_two_point_with_budget(
    kernel: &Kernel,
    p: f64,
    eps: f64,
    n_max: usize,
    budget: u128,
) -> Result<TwoPointTable> {
    check_params(kernel, p, eps, n_max)?;
    let q = one_step(kernel, p, eps);
    let bonds = float_bonds(&q);
    let (raw, masses) = frontier_program(&bonds, kernel.range(), n_max, budget)?;
    let d = kernel.dim();
    let mass_error: Vec<f64> = masses.iter().map(|m| (m - 1.0).abs()).collect();
    if let Some(bad) = mass_error.iter().find(|e| **e > 1e-12) {
        return Err(Error::NonFinite(format!("frontier law lost mass {bad}")));
    }
    let tau = raw
        .into_iter()
        .enumerate()
        .map(|(n, values)| Field { d, radius: n as i64 * kernel.range(), values })
        .collect();
    Ok(TwoPointTable::assemble(kernel, p, eps, q, tau, mass_error))
}

/// `tau_n(x)` in exact rational arithmetic. Inputs are taken as the exact
/// binary values of `p` and `eps`.
pub fn exact_two_point_rational(kernel: &Kernel, p: f64, eps: f64, n_max: usize) -> Result<Vec<Vec<BigRational>>> {
    check_params(kernel, p, eps, n_max)?;
    let bonds = rational_bonds(kernel, p, eps);
    let (tau, masses) = frontier_program(&bonds, kernel.range(), n_max, DEFAULT_BUDGET)?;
    if masses.iter().any(|m| !m.is_one()) {
        return Err(Error::Mismatch("rational frontier law does not sum to one".into()));
    }
    Ok(tau)
}

/// Largest `|tau_n(x)|` deviation between the double table and the rational
/// recomputation.
pub fn rational_deviation(kernel: &Kernel, table: &TwoPointTable) -> Result<f64> {
    let exact = exact_two_point_rational(kernel, table.config.p, table.config.eps, table.n_max)?;
    let mut worst: f64 = 0.0;
    for (f, e) in table.tau.iter().zip(&exact) {
        for (v, r) in f.values.iter().zip(e) {
            worst = worst.max((v - r.to_f64().unwrap_or(f64::NAN)).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_kernel, KernelSpec};
    use crate::lattice::signed_permutations;

    fn s(c: &[i64]) -> Site {
        Site::from_coords(c)
    }

    fn reference() -> TwoPointTable {
        let k = build_kernel(KernelSpec::uniform(1, 1)).unwrap();
        exact_two_point(&k, 1.0, 1.0, 5).unwrap()
    }

    #[test]
    fn hand_values() {
        let t = reference();
        assert_eq!(t.tau_at(0, &s(&[0])), 1.0);
        assert_eq!(t.tau_at(1, &s(&[1])), 0.5);
        assert_eq!(t.tau_at(1, &s(&[0])), 0.0);
        assert!((t.tau_at(2, &s(&[2])) - 0.25).abs() < 1e-15);
        assert!((t.tau_at(2, &s(&[0])) - 7.0 / 16.0).abs() < 1e-15);
        // 2 * 1/4 + 7/16
        assert!((t.tau[2].sum() - 15.0 / 16.0).abs() < 1e-15);
        assert!((t.tau_at(3, &s(&[3])) - 0.125).abs() < 1e-15);
        assert!(t.mass_error.iter().all(|e| *e <= 1e-12));
    }

    #[test]
    fn brute_force_over_bond_configurations() {
        // Independent oracle: enumerate every open/closed assignment of the
        // bonds that can matter for generations <= 3.
        let t = reference();
        let n_max = 3i64;
        let mut bonds = Vec::new();
        for n in 0..n_max {
            for x in -n..=n {
                for dx in [-1, 1] {
                    bonds.push((n, x, x + dx));
                }
            }
        }
        let nb = bonds.len();
        let mut tau = vec![[0.0f64; 7]; 4];
        for cfg in 0u64..(1 << nb) {
            let w = 0.5f64.powi(nb as i32);
            let mut reached = vec![vec![false; 7]; 4];
            reached[0][3] = true;
            for n in 0..n_max as usize {
                for (b, &(m, x, y)) in bonds.iter().enumerate() {
                    if m as usize == n && cfg >> b & 1 == 1 && reached[n][(x + 3) as usize] {
                        reached[n + 1][(y + 3) as usize] = true;
                    }
                }
            }
            for n in 0..4 {
                for x in 0..7 {
                    if reached[n][x] {
                        tau[n][x] += w;
                    }
                }
            }
        }
        for n in 0..4 {
            for x in -3..=3i64 {
                let got = t.tau_at(n, &s(&[x]));
                assert!((got - tau[n][(x + 3) as usize]).abs() < 1e-14, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn invariants_and_symmetry() {
        for (d, l, n_max, p, eps) in [(1, 2, 3, 1.3, 1.0), (2, 1, 3, 1.0, 1.0), (1, 1, 5, 0.7, 0.5)] {
            let k = build_kernel(KernelSpec::uniform(d, l)).unwrap();
            let t = exact_two_point(&k, p, eps, n_max).unwrap();
            for (n, f) in t.tau.iter().enumerate() {
                assert_eq!(f.radius, n as i64 * l);
                for (x, &v) in f.points().iter().zip(&f.values) {
                    assert!((0.0..=1.0 + 1e-15).contains(&v));
                    for (perm, flip) in signed_permutations(d) {
                        assert!((f.get(&x.signed_permute(&perm, &flip)) - v).abs() < 1e-14);
                    }
                }
                assert!((f.fourier(&vec![0.0; d]) - f.sum()).abs() < 1e-12);
            }
            assert_eq!(t.tau[0], Field::delta(d, 0));
        }
    }

    #[test]
    fn eps_one_p_zero_and_pure_stay() {
        let k = build_kernel(KernelSpec::uniform(1, 1)).unwrap();
        let t = exact_two_point(&k, 0.0, 0.5, 4).unwrap();
        for n in 0..=4 {
            assert!((t.tau_at(n, &Site::ORIGIN) - 0.5f64.powi(n as i32)).abs() < 1e-15);
            assert!((t.tau[n].sum() - 0.5f64.powi(n as i32)).abs() < 1e-15);
        }
    }

    #[test]
    fn rationals_agree_with_doubles() {
        let k = build_kernel(KernelSpec::uniform(1, 1)).unwrap();
        let t = exact_two_point(&k, 1.0, 1.0, 4).unwrap();
        let exact = exact_two_point_rational(&k, 1.0, 1.0, 4).unwrap();
        assert_eq!(exact[2][2], BigRational::new(7.into(), 16.into()));
        assert!(rational_deviation(&k, &t).unwrap() < 1e-15);
        let t = exact_two_point(&k, 0.9, 0.3, 4).unwrap();
        assert!(rational_deviation(&k, &t).unwrap() < 1e-14);
    }

    #[test]
    fn budget_refusal() {
        let k = build_kernel(KernelSpec::uniform(2, 1)).unwrap();
        match exact_two_point(&k, 1.0, 1.0, 4) {
            Err(Error::BudgetExceeded { needed, budget, .. }) => assert!(needed > budget),
            other => panic!("expected refusal, got {other:?}"),
        }
        let k = build_kernel(KernelSpec::uniform(1, 1)).unwrap();
        assert!(matches!(exact_two_point_with_budget(&k, 1.0, 1.0, 5, 10), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn random_walk_table_is_a_convolution_power() {
        let k = build_kernel(KernelSpec::uniform(1, 1)).unwrap();
        let t = TwoPointTable::random_walk(&k, 1.0, 1.0, 3).unwrap();
        assert_eq!(t.tau_at(2, &s(&[0])), 0.5);
        assert!((t.tau[3].sum() - 1.0).abs() < 1e-15);
    }
}
