//! Compensated accumulation and mergeable moment accumulators.

use serde::{Deserialize, Serialize};

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    pub fn merge(&mut self, other: &KahanSum) {
        self.add(other.sum);
        self.add(other.comp);
    }
}

/// `(count, sum, sum of squares)` of per-sample values.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulator {
    pub count: u64,
    pub sum: KahanSum,
    pub sum_sq: KahanSum,
}

impl Accumulator {
    #[inline]
    pub fn push(&mut self, v: f64) {
        self.count += 1;
        self.sum.add(v);
        self.sum_sq.add(v * v);
    }

    /// Records `n` samples equal to zero.
    #[inline]
    pub fn push_zeros(&mut self, n: u64) {
        self.count += n;
    }

    pub fn merge(&mut self, other: &Accumulator) {
        self.count += other.count;
        self.sum.merge(&other.sum);
        self.sum_sq.merge(&other.sum_sq);
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        self.sum.value() / self.count as f64
    }

    /// Sample standard deviation divided by `sqrt(count)`.
    pub fn stderr(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let s = self.sum.value();
        let var = ((self.sum_sq.value() - s * s / n) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = KahanSum::default();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }

    #[test]
    fn accumulator_basic() {
        let mut a = Accumulator::default();
        for v in [1.0, 2.0, 3.0, 4.0] {
            a.push(v);
        }
        assert_eq!(a.mean(), 2.5);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((a.stderr() - sd / 2.0).abs() < 1e-14);
        let mut z = Accumulator::default();
        z.push(1.0);
        z.push_zeros(3);
        assert_eq!(z.mean(), 0.25);
    }

    #[test]
    fn slope_of_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        assert!((ols_slope(&x, &y) - 3.0).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn merge_matches_sequential(vals in proptest::collection::vec(-1e3f64..1e3, 2..60), cut in 0usize..60) {
            let cut = cut.min(vals.len());
            let mut whole = Accumulator::default();
            vals.iter().for_each(|&v| whole.push(v));
            let (mut a, mut b) = (Accumulator::default(), Accumulator::default());
            vals[..cut].iter().for_each(|&v| a.push(v));
            vals[cut..].iter().for_each(|&v| b.push(v));
            let mut ab = a;
            ab.merge(&b);
            let mut ba = b;
            ba.merge(&a);
            prop_assert_eq!(ab.count, whole.count);
            prop_assert!((ab.mean() - whole.mean()).abs() <= 1e-12 * (1.0 + whole.mean().abs()));
            prop_assert!((ab.mean() - ba.mean()).abs() <= 1e-12 * (1.0 + whole.mean().abs()));
            prop_assert!((ab.stderr() - whole.stderr()).abs() <= 1e-9 * (1.0 + whole.stderr()));
        }
    }
}
