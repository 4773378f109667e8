//! Dense real functions on a finite box of Z^d.

use serde::{Deserialize, Serialize};

use crate::lattice::{box_index, box_points, Site};

/// A function on `{x : ||x||_inf <= radius}`, zero outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub d: usize,
    pub radius: i64,
    pub values: Vec<f64>,
}

impl Field {
    pub fn zeros(d: usize, radius: i64) -> Field {
        let side = (2 * radius + 1) as usize;
        Field { d, radius, values: vec![0.0; side.pow(d as u32)] }
    }

    pub fn delta(d: usize, radius: i64) -> Field {
        let mut f = Field::zeros(d, radius);
        f.set(&Site::ORIGIN, 1.0);
        f
    }

    pub fn points(&self) -> Vec<Site> {
        box_points(self.d, self.radius)
    }

    pub fn get(&self, x: &Site) -> f64 {
        box_index(x, self.d, self.radius).map_or(0.0, |i| self.values[i])
    }

    pub fn set(&mut self, x: &Site, v: f64) {
        let i = box_index(x, self.d, self.radius).expect("site inside the box");
        self.values[i] = v;
    }

    pub fn add_at(&mut self, x: &Site, v: f64) {
        let i = box_index(x, self.d, self.radius).expect("site inside the box");
        self.values[i] += v;
    }

    /// `(self * other)(x) = sum_y self(y) other(x - y)` restricted to the box
    /// of `radius`. Panics if mass would fall outside.
    pub fn convolve(&self, other: &Field, radius: i64) -> Field {
        let mut out = Field::zeros(self.d, radius);
        let pa = self.points();
        let pb = other.points();
        for (y, &a) in pa.iter().zip(&self.values) {
            if a == 0.0 {
                continue;
            }
            for (z, &b) in pb.iter().zip(&other.values) {
                if b == 0.0 {
                    continue;
                }
                let x = y.checked_add(z, self.d).expect("small boxes");
                match box_index(&x, self.d, radius) {
                    Some(i) => out.values[i] += a * b,
                    None => panic!("convolution leaves the box of radius {radius}"),
                }
            }
        }
        out
    }

    pub fn sub_assign(&mut self, other: &Field) {
        assert_eq!(self.radius, other.radius);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a -= b;
        }
    }

    pub fn add_assign(&mut self, other: &Field) {
        assert_eq!(self.radius, other.radius);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }

    /// Same function on a larger box.
    pub fn widen(&self, radius: i64) -> Field {
        assert!(radius >= self.radius);
        let mut out = Field::zeros(self.d, radius);
        for (x, &v) in self.points().iter().zip(&self.values) {
            if v != 0.0 {
                out.set(x, v);
            }
        }
        out
    }

    /// Restriction to a smaller box.
    pub fn shrink(&self, radius: i64) -> Field {
        assert!(radius <= self.radius);
        let mut out = Field::zeros(self.d, radius);
        for (i, x) in out.points().iter().enumerate() {
            out.values[i] = self.get(x);
        }
        out
    }

    pub fn sup_diff(&self, other: &Field) -> f64 {
        let r = self.radius.max(other.radius);
        let pts = box_points(self.d, r);
        pts.iter().map(|x| (self.get(x) - other.get(x)).abs()).fold(0.0, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `sum_x x_1^{2j} f(x)`.
    pub fn axis_moment(&self, j: u32) -> f64 {
        self.points()
            .iter()
            .zip(&self.values)
            .map(|(x, &v)| (x.0[0] as f64).powi(2 * j as i32) * v)
            .sum()
    }

    /// `sum_x |x|^{2j} f(x)`.
    pub fn euclid_moment(&self, j: u32) -> f64 {
        self.points()
            .iter()
            .zip(&self.values)
            .map(|(x, &v)| (x.norm2(self.d) as f64).powi(j as i32) * v)
            .sum()
    }

    /// `sum_x f(x) cos(k.x)`, the transform of a reflection-symmetric `f`.
    pub fn fourier(&self, k: &[f64]) -> f64 {
        self.points().iter().zip(&self.values).map(|(x, &v)| v * x.dot(k).cos()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convolution_of_deltas_and_walk() {
        let mut step = Field::zeros(1, 1);
        step.set(&Site::from_coords(&[1]), 0.5);
        step.set(&Site::from_coords(&[-1]), 0.5);
        let two = step.convolve(&step, 2);
        assert_eq!(two.get(&Site::from_coords(&[0])), 0.5);
        assert_eq!(two.get(&Site::from_coords(&[2])), 0.25);
        assert_eq!(two.sum(), 1.0);
        assert_eq!(Field::delta(1, 3).convolve(&step, 3).sup_diff(&step), 0.0);
        assert_eq!(two.axis_moment(1), 2.0);
    }
}
