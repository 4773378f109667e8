//! The spread-out step distribution `D` on Z^d.
//!
//! `D(x)` is proportional to a symmetric profile `h` evaluated at the scaled
//! point `x / (2L)` over the box `||x||_inf <= L`, with `D(0) = 0`. The
//! default uniform box puts equal mass on every non-zero point of the box.

use std::fmt;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};
use crate::stats::KahanSum;
use crate::lattice::{box_index, box_points, signed_permutations, Site, MAX_DIM};

/// A profile function evaluated on scaled coordinates in `[-1/2, 1/2]^d`.
pub type ProfileFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Profile {
    /// Indicator of `[-1/2, 1/2]^d`.
    UniformBox,
    /// Caller supplied profile; must be non-negative and invariant under the
    /// signed permutations of the axes.
    Custom { name: String, h: ProfileFn },
}

impl Profile {
    pub fn name(&self) -> &str {
        match self {
            Profile::UniformBox => "uniform-box",
            Profile::Custom { name, .. } => name,
        }
    }
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct KernelSpec {
    pub d: usize,
    pub range: i64,
    pub profile: Profile,
}

impl KernelSpec {
    pub fn uniform(d: usize, range: i64) -> Self {
        KernelSpec { d, range, profile: Profile::UniformBox }
    }
}

/// Moments `sum |x|^n D(x)` are cached up to this order.
const CACHED_MOMENTS: usize = 8;

/// Immutable after construction.
#[derive(Clone)]
pub struct Kernel {
    spec: KernelSpec,
    support: Vec<Site>,
    prob: Vec<f64>,
    /// `D` on the full box, indexed by [`box_index`].
    dense: Vec<f64>,
    sigma2: f64,
    max_prob: f64,
    uniform: bool,
    moments: [f64; CACHED_MOMENTS + 1],
    sampler: Option<WeightedIndex<f64>>,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("d", &self.spec.d)
            .field("L", &self.spec.range)
            .field("profile", &self.spec.profile)
            .field("support", &self.support.len())
            .field("sigma2", &self.sigma2)
            .finish()
    }
}

pub fn build_kernel(spec: KernelSpec) -> Result<Kernel> {
    let d = spec.d;
    let range = spec.range;
    if d == 0 || d > MAX_DIM {
        return Err(Error::InvalidKernel(format!("dimension must be in 1..={MAX_DIM}, got {d}")));
    }
    if range < 1 {
        return Err(Error::InvalidKernel(format!("range L must be >= 1, got {range}")));
    }
    let side = (2 * range + 1) as u128;
    if side.pow(d as u32) > 50_000_000 {
        return Err(Error::InvalidKernel(format!("box (2L+1)^d is too large for d={d}, L={range}")));
    }

    let points = box_points(d, range);
    let scale = 2.0 * range as f64;
    let weight_of = |x: &Site| -> f64 {
        match &spec.profile {
            Profile::UniformBox => 1.0,
            Profile::Custom { h, .. } => {
                let u: Vec<f64> = x.coords(d).iter().map(|&c| c as f64 / scale).collect();
                h(&u)
            }
        }
    };

    let mut weights = vec![0.0; points.len()];
    for (w, x) in weights.iter_mut().zip(&points) {
        if *x == Site::ORIGIN {
            continue;
        }
        let v = weight_of(x);
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidKernel(format!("profile value {v} at {x:?}")));
        }
        *w = v;
    }

    if let Profile::Custom { .. } = spec.profile {
        let syms = signed_permutations(d);
        for (x, &w) in points.iter().zip(&weights) {
            for (perm, flip) in &syms {
                let y = x.signed_permute(perm, flip);
                let wy = weights[box_index(&y, d, range).expect("box is symmetric")];
                if (wy - w).abs() > 1e-12 * w.abs().max(wy.abs()) {
                    return Err(Error::InvalidKernel(format!(
                        "profile {} is not lattice-symmetric: h({x:?})={w} but h({y:?})={wy}",
                        spec.profile.name()
                    )));
                }
            }
        }
    }

    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidKernel("profile has no mass off the origin".into()));
    }

    let uniform = matches!(spec.profile, Profile::UniformBox);
    let count = weights.iter().filter(|&&w| w > 0.0).count();
    let dense: Vec<f64> = if uniform {
        let mass = 1.0 / count as f64;
        weights.iter().map(|&w| if w > 0.0 { mass } else { 0.0 }).collect()
    } else {
        weights.iter().map(|&w| w / total).collect()
    };

    let mut support = Vec::with_capacity(count);
    let mut prob = Vec::with_capacity(count);
    for (x, &pr) in points.iter().zip(&dense) {
        if pr > 0.0 {
            support.push(*x);
            prob.push(pr);
        }
    }

    let mut moments = [0.0; CACHED_MOMENTS + 1];
    for (n, m) in moments.iter_mut().enumerate() {
        *m = raw_moment(&support, &prob, d, n as u32);
    }
    let sigma2 = moments[2];
    let max_prob = prob.iter().cloned().fold(0.0, f64::max);
    let sampler = if uniform {
        None
    } else {
        Some(WeightedIndex::new(&prob).map_err(|e| Error::InvalidKernel(e.to_string()))?)
    };

    Ok(Kernel { spec, support, prob, dense, sigma2, max_prob, uniform, moments, sampler })
}

fn raw_moment(support: &[Site], prob: &[f64], d: usize, n: u32) -> f64 {
    let mut acc = KahanSum::default();
    for (x, &pr) in support.iter().zip(prob) {
        acc.add(if n == 0 { pr } else { norm_pow(x.norm2(d), n as f64) * pr });
    }
    acc.value()
}

/// `|x|^s` from the exact squared norm, with even integer powers computed
/// without a square root.
#[inline]
pub fn norm_pow(norm2: i128, s: f64) -> f64 {
    if s == 0.0 {
        return 1.0;
    }
    let r2 = norm2 as f64;
    let half = s * 0.5;
    if half.fract() == 0.0 && half <= 64.0 {
        r2.powi(half as i32)
    } else {
        r2.powf(half)
    }
}

/// `|c|^s` for a single coordinate.
#[inline]
pub fn abs_pow(c: i64, s: f64) -> f64 {
    if s == 0.0 {
        return 1.0;
    }
    let a = c.unsigned_abs() as f64;
    if s.fract() == 0.0 && s <= 128.0 {
        a.powi(s as i32)
    } else {
        a.powf(s)
    }
}

impl Kernel {
    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.d
    }

    pub fn range(&self) -> i64 {
        self.spec.range
    }

    pub fn support(&self) -> &[Site] {
        &self.support
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.prob
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn max_prob(&self) -> f64 {
        self.max_prob
    }

    /// All support points carry equal mass.
    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// `D(x)`, zero off the support.
    pub fn prob_at(&self, x: &Site) -> f64 {
        box_index(x, self.spec.d, self.spec.range).map_or(0.0, |i| self.dense[i])
    }

    /// `sum_x |x|^n D(x)` with `|x|` the Euclidean norm.
    pub fn moment(&self, n: u32) -> f64 {
        match self.moments.get(n as usize) {
            Some(&m) => m,
            None => raw_moment(&self.support, &self.prob, self.spec.d, n),
        }
    }

    /// `sum_x x_1^{2j} D(x)`.
    pub fn axis_moment(&self, j: u32) -> f64 {
        self.support
            .iter()
            .zip(&self.prob)
            .map(|(x, &pr)| abs_pow(x.0[0], 2.0 * j as f64) * pr)
            .sum()
    }

    /// `D^(k) = sum_x D(x) cos(k.x)`; real by symmetry.
    pub fn fourier(&self, k: &[f64]) -> f64 {
        assert_eq!(k.len(), self.spec.d, "wavevector length must equal the dimension");
        self.support.iter().zip(&self.prob).map(|(x, &pr)| pr * x.dot(k).cos()).sum()
    }

    /// Draws an offset `X ~ D`.
    #[inline]
    pub fn sample_offset<R: Rng + ?Sized>(&self, rng: &mut R) -> Site {
        match &self.sampler {
            None => self.support[rng.random_range(0..self.support.len())],
            Some(w) => self.support[w.sample(rng)],
        }
    }
}

pub fn kernel_moment(k: &Kernel, n: u32) -> f64 {
    k.moment(n)
}

pub fn kernel_fourier(k: &Kernel, wavevector: &[f64]) -> f64 {
    k.fourier(wavevector)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn uni(d: usize, l: i64) -> Kernel {
        build_kernel(KernelSpec::uniform(d, l)).unwrap()
    }

    #[test]
    fn small_kernels() {
        let k = uni(1, 1);
        assert_eq!(k.prob_at(&Site::from_coords(&[1])), 0.5);
        assert_eq!(k.prob_at(&Site::from_coords(&[-1])), 0.5);
        assert_eq!(k.prob_at(&Site::ORIGIN), 0.0);

        let k = uni(2, 1);
        assert_eq!(k.support().len(), 8);
        assert!(k.probabilities().iter().all(|&p| p == 0.125));

        let k = uni(1, 2);
        for x in [-2, -1, 1, 2] {
            assert_eq!(k.prob_at(&Site::from_coords(&[x])), 0.25);
        }
    }

    #[test]
    fn moments() {
        assert_eq!(uni(1, 1).moment(2), 1.0);
        assert_eq!(uni(1, 2).moment(2), 2.5);
        assert_eq!(uni(2, 1).moment(2), 1.5);
        assert!((uni(3, 2).moment(0) - 1.0).abs() < 1e-15);
        // uncached order agrees with a direct sum
        let k = uni(1, 2);
        assert!((k.moment(10) - (2.0 + 2.0 * 1024.0) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn fourier_values() {
        assert_eq!(uni(1, 1).fourier(&[0.0]), 1.0);
        assert!((uni(1, 1).fourier(&[PI]) + 1.0).abs() < 1e-15);
        assert!((uni(1, 2).fourier(&[PI / 2.0]) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(build_kernel(KernelSpec::uniform(0, 1)).is_err());
        assert!(build_kernel(KernelSpec::uniform(1, 0)).is_err());
        let skew = Profile::Custom { name: "skew".into(), h: Arc::new(|u: &[f64]| 1.0 + u[0]) };
        let err = build_kernel(KernelSpec { d: 1, range: 2, profile: skew }).unwrap_err();
        assert!(err.to_string().contains("not lattice-symmetric"));
        let aniso = Profile::Custom { name: "aniso".into(), h: Arc::new(|u: &[f64]| 1.0 + u[0] * u[0]) };
        assert!(build_kernel(KernelSpec { d: 2, range: 1, profile: aniso }).is_err());
    }

    #[test]
    fn custom_symmetric_profile() {
        let tent = Profile::Custom {
            name: "tent".into(),
            h: Arc::new(|u: &[f64]| u.iter().map(|c| 1.5 - c.abs()).product()),
        };
        let k = build_kernel(KernelSpec { d: 2, range: 2, profile: tent }).unwrap();
        assert!(!k.is_uniform());
        assert!((k.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(k.prob_at(&Site::from_coords(&[1, 0])) > k.prob_at(&Site::from_coords(&[2, 2])));
    }

    #[test]
    fn normalization_grid() {
        for d in 1..=5 {
            for l in 1..=10 {
                if (2 * l + 1_i64).pow(d as u32) > 2_000_000 {
                    continue;
                }
                let k = uni(d, l);
                assert!((k.moment(0) - 1.0).abs() < 1e-12, "d={d} L={l}");
                assert_eq!(k.prob_at(&Site::ORIGIN), 0.0);
            }
        }
    }

    #[test]
    fn moments_grow_with_range() {
        for n in [1, 2, 4] {
            let mut prev = 0.0;
            for l in 1..=6 {
                let m = uni(2, l).moment(n);
                assert!(m > prev);
                // Riemann-sum limit of the box: m / L^n is bounded between
                // the extreme radii of the unit box.
                let scaled = m / (l as f64).powi(n as i32);
                assert!(scaled > 0.1 && scaled <= 2f64.powf(n as f64 / 2.0) + 1e-12);
                prev = m;
            }
        }
    }

    proptest! {
        #[test]
        fn fourier_symmetric_and_bounded(d in 1usize..4, l in 1i64..4, raw in proptest::collection::vec(-4.0f64..4.0, 3)) {
            let k = uni(d, l);
            let kv = &raw[..d];
            let v = k.fourier(kv);
            prop_assert!(v.abs() <= 1.0 + 1e-12);
            let neg: Vec<f64> = kv.iter().map(|c| -c).collect();
            prop_assert!((k.fourier(&neg) - v).abs() < 1e-12);
            let mut rev = kv.to_vec();
            rev.reverse();
            prop_assert!((k.fourier(&rev) - v).abs() < 1e-12);
        }
    }
}
