//! Triangular inversion of the lace recursion
//! `tau_{n+1} = q * tau_n + sum_{m=2}^{n+1} pi_m * q * tau_{n-m} + pi_{n+1}`,
//! with `pi_0 = pi_1 = 0` and empty sums equal to zero.

use serde::{Deserialize, Serialize};

use super::field::Field;
use super::two_point::{ExactConfig, TwoPointTable, MOMENT_ORDERS};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PiTable {
    pub config: ExactConfig,
    pub n_max: usize,
    /// `pi[n]` on the box of radius `n_max L`.
    pub pi: Vec<Field>,
    /// Sup-norm gap between `tau` and its reconstruction from `(q, pi)`.
    pub residual: f64,
    /// `axis[j][n] = sum_x x_1^{2j} pi_n(x)`.
    pub axis: Vec<Vec<f64>>,
    /// `|hat pi_n(0)|`.
    pub abs_total: Vec<f64>,
}

/// `pi_m * q * tau_{n-m}` summed over `2 <= m <= upto`.
fn memory_term(pi: &[Field], q_tau: &[Field], n: usize, upto: usize, radius: i64) -> Field {
    let d = q_tau[0].d;
    let mut acc = Field::zeros(d, radius);
    for m in 2..=upto.min(n) {
        acc.add_assign(&pi[m].convolve(&q_tau[n - m], radius));
    }
    acc
}

pub fn lace_invert(t: &TwoPointTable) -> PiTable {
    let d = t.d();
    let radius = t.n_max as i64 * t.range();
    let tau: Vec<Field> = (0..=t.n_max).map(|n| t.tau_wide(n)).collect();
    let q_tau: Vec<Field> = tau.iter().map(|f| f.convolve(&t.q, radius + t.range())).collect();
    let mut pi = vec![Field::zeros(d, radius), Field::zeros(d, radius)];
    for n in 1..t.n_max {
        // pi_{n+1} = tau_{n+1} - q*tau_n - sum_{m=2}^n pi_m*q*tau_{n-m}
        let mut next = tau[n + 1].clone();
        next.sub_assign(&q_tau[n].shrink(radius));
        next.sub_assign(&memory_term(&pi, &q_tau, n, n, radius + t.range()).shrink(radius));
        pi.push(next);
    }
    pi.truncate(t.n_max + 1);
    let residual = resubstitute(&t.q, &pi, t.n_max)
        .iter()
        .zip(&tau)
        .map(|(a, b)| a.sup_diff(b))
        .fold(0.0, f64::max);
    let axis = (0..=MOMENT_ORDERS).map(|j| pi.iter().map(|f| f.axis_moment(j)).collect()).collect();
    let abs_total = pi.iter().map(|f| f.sum().abs()).collect();
    PiTable { config: t.config.clone(), n_max: t.n_max, pi, residual, axis, abs_total }
}

/// Rebuilds `tau_0..tau_{n_max}` from `q` and `pi` by the forward recursion.
pub fn resubstitute(q: &Field, pi: &[Field], n_max: usize) -> Vec<Field> {
    let d = q.d;
    let radius = n_max as i64 * q.radius;
    let wide = radius + q.radius;
    let mut tau = vec![Field::delta(d, radius)];
    let mut q_tau = vec![tau[0].convolve(q, wide)];
    for n in 0..n_max {
        let mut next = q_tau[n].shrink(radius);
        next.add_assign(&memory_term(pi, &q_tau, n, n, wide).shrink(radius));
        next.add_assign(&pi[n + 1]);
        q_tau.push(next.convolve(q, wide));
        tau.push(next);
    }
    tau
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::two_point::exact_two_point;
    use crate::kernel::{build_kernel, KernelSpec};
    use crate::lattice::Site;

    #[test]
    fn random_walk_has_no_correction() {
        for (d, l, eps, p) in [(1, 1, 1.0, 1.0), (2, 1, 0.5, 0.8), (1, 2, 0.3, 1.1)] {
            let k = build_kernel(KernelSpec::uniform(d, l)).unwrap();
            let t = TwoPointTable::random_walk(&k, p, eps, 5).unwrap();
            let pi = lace_invert(&t);
            for f in &pi.pi {
                assert!(f.values.iter().all(|v| v.abs() < 1e-12));
            }
            assert!(pi.residual < 1e-12);
        }
    }

    #[test]
    fn reference_corrections() {
        let k = build_kernel(KernelSpec::uniform(1, 1)).unwrap();
        let t = exact_two_point(&k, 1.0, 1.0, 5).unwrap();
        let pi = lace_invert(&t);
        let at = |n: usize, x: i64| pi.pi[n].get(&Site::from_coords(&[x]));
        assert!((at(2, 0) + 1.0 / 16.0).abs() < 1e-12);
        assert!(at(2, 2).abs() < 1e-12 && at(2, -2).abs() < 1e-12);
        assert!(pi.pi[0].values.iter().chain(&pi.pi[1].values).all(|v| *v == 0.0));
        assert!(pi.residual <= 1e-10);
        for n in 3..=5 {
            assert!(pi.abs_total[n] <= pi.abs_total[2], "n={n}: {:?}", pi.abs_total);
        }
    }

    #[test]
    fn perturbed_pi_changes_tau() {
        // resubstitution is not vacuous
        let k = build_kernel(KernelSpec::uniform(1, 1)).unwrap();
        let t = exact_two_point(&k, 1.0, 1.0, 4).unwrap();
        let mut pi = lace_invert(&t);
        pi.pi[3].add_at(&Site::ORIGIN, 1e-6);
        let back = resubstitute(&t.q, &pi.pi, 4);
        assert!((back[3].get(&Site::ORIGIN) - t.tau_at(3, &Site::ORIGIN) - 1e-6).abs() < 1e-12);
    }
}
