//! Integer lattice points of Z^d with fixed inline storage.

use std::fmt;

/// Largest supported dimension.
pub const MAX_DIM: usize = 8;

/// A point of Z^d. Coordinates beyond the dimension in use are always zero,
/// so equality, hashing and ordering only see the meaningful axes.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Site(pub [i64; MAX_DIM]);

impl Site {
    pub const ORIGIN: Site = Site([0; MAX_DIM]);

    pub fn from_coords(coords: &[i64]) -> Site {
        assert!(coords.len() <= MAX_DIM, "dimension {} exceeds {MAX_DIM}", coords.len());
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Site(c)
    }

    pub fn coords(&self, d: usize) -> &[i64] {
        &self.0[..d]
    }

    /// Coordinate-wise sum, `None` on overflow.
    #[inline]
    pub fn checked_add(&self, other: &Site, d: usize) -> Option<Site> {
        let mut out = [0; MAX_DIM];
        for i in 0..d {
            out[i] = self.0[i].checked_add(other.0[i])?;
        }
        Some(Site(out))
    }

    #[inline]
    pub fn sub(&self, other: &Site, d: usize) -> Site {
        let mut out = [0; MAX_DIM];
        for i in 0..d {
            out[i] = self.0[i] - other.0[i];
        }
        Site(out)
    }

    pub fn neg(&self) -> Site {
        let mut out = self.0;
        for v in out.iter_mut() {
            *v = -*v;
        }
        Site(out)
    }

    /// Squared Euclidean norm as an exact integer.
    #[inline]
    pub fn norm2(&self, d: usize) -> i128 {
        self.0[..d].iter().map(|&c| (c as i128) * (c as i128)).sum()
    }

    #[inline]
    pub fn sup_norm(&self, d: usize) -> i64 {
        self.0[..d].iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn dot(&self, k: &[f64]) -> f64 {
        k.iter().zip(self.0.iter()).map(|(a, &b)| a * b as f64).sum()
    }

    /// Applies a signed permutation: output axis `i` takes input axis
    /// `perm[i]`, negated when `flip[i]` is set.
    pub fn signed_permute(&self, perm: &[usize], flip: &[bool]) -> Site {
        let mut out = [0; MAX_DIM];
        for (i, (&src, &f)) in perm.iter().zip(flip).enumerate() {
            out[i] = if f { -self.0[src] } else { self.0[src] };
        }
        Site(out)
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let last = self.0.iter().rposition(|&c| c != 0).map_or(1, |i| i + 1);
        f.debug_list().entries(&self.0[..last]).finish()
    }
}

/// All points of the box `{x : ||x||_inf <= radius}` in lexicographic order.
pub fn box_points(d: usize, radius: i64) -> Vec<Site> {
    let side = (2 * radius + 1) as usize;
    let total = side.pow(d as u32);
    let mut out = Vec::with_capacity(total);
    let mut c = vec![-radius; d];
    for _ in 0..total {
        out.push(Site::from_coords(&c));
        for i in (0..d).rev() {
            if c[i] < radius {
                c[i] += 1;
                break;
            }
            c[i] = -radius;
        }
    }
    out
}

/// Every signed permutation of `d` axes as `(perm, flips)` pairs.
pub fn signed_permutations(d: usize) -> Vec<(Vec<usize>, Vec<bool>)> {
    let mut perms = Vec::new();
    permute(&mut (0..d).collect::<Vec<_>>(), 0, &mut perms);
    let mut out = Vec::with_capacity(perms.len() << d);
    for p in perms {
        for mask in 0..(1u32 << d) {
            let flips = (0..d).map(|i| mask >> i & 1 == 1).collect();
            out.push((p.clone(), flips));
        }
    }
    out
}

fn permute(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, out);
        items.swap(k, i);
    }
}

/// Dense row-major index of a site inside the box of the given radius.
#[inline]
pub fn box_index(site: &Site, d: usize, radius: i64) -> Option<usize> {
    let side = 2 * radius + 1;
    let mut idx = 0i64;
    for &c in &site.0[..d] {
        if c.abs() > radius {
            return None;
        }
        idx = idx * side + (c + radius);
    }
    Some(idx as usize)
}
