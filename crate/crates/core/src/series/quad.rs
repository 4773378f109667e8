//! Adaptive Simpson quadrature.

fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(fa, flm, fm, a, m);
    let right = simpson(fm, frm, fb, m, b);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    refine(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + refine(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// `int_a^b f` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    refine(&f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 40)
}

/// `int_0^b f` for integrands with a peak of width `scale` at 0: geometric
/// panels `[0, scale], [scale, 2 scale], [2 scale, 4 scale], ...`, each with a
/// relative tolerance.
pub fn peaked_integral<F: Fn(f64) -> f64>(f: F, scale: f64, b: f64, rel_tol: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = scale.min(b);
    let mut total = 0.0;
    while lo < b {
        let m = 0.5 * (lo + hi);
        let guess = (hi - lo) * f(m).abs();
        total += adaptive_simpson(&f, lo, hi, rel_tol * guess.max(f64::MIN_POSITIVE));
        lo = hi;
        hi = (2.0 * hi).min(b);
    }
    total
}
