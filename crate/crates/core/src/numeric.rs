//! Small numerical helpers shared across modules.

use num_complex::Complex64;

const PAIRWISE_BLOCK: usize = 8;

/// Pairwise (cascade) summation; error grows like O(log n) instead of O(n).
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= PAIRWISE_BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn pairwise_sum_complex(zs: &[Complex64]) -> Complex64 {
    if zs.len() <= PAIRWISE_BLOCK {
        return zs.iter().sum();
    }
    let mid = zs.len() / 2;
    pairwise_sum_complex(&zs[..mid]) + pairwise_sum_complex(&zs[mid..])
}

/// Golden-section search for the maximum of a unimodal function on `[lo, hi]`.
/// Returns `(argmax, max)`, comparing against both endpoints so that a
/// maximum sitting on the boundary is reported exactly.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    let mut best = (mid, f(mid));
    for x in [lo, hi] {
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Solves `f(x) = 0` on a sign-changing bracket by bisection. Stops when
/// `|f(mid)| < ftol`, or when the bracket cannot shrink any further.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, ftol: f64) -> f64 {
    let mut flo = f(lo);
    if flo.abs() < ftol {
        return lo;
    }
    let fhi = f(hi);
    if fhi.abs() < ftol {
        return hi;
    }
    debug_assert!(flo * fhi <= 0.0, "bisect: bracket without sign change");
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo.min(hi) || mid >= lo.max(hi) {
            return mid;
        }
        let fm = f(mid);
        if fm.abs() < ftol {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
}
