//! Bessel function of the first kind, order zero, and its first zero.
//!
//! Only the range needed by the improved Hardy constant is covered: the
//! power series is summed directly, which is accurate to a few ulps for
//! `|x| <= 8`.

/// `J_0(x)` from its power series `sum (-x^2/4)^k / (k!)^2`.
pub fn j0(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * kf);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// Bisection for a sign change of `f` on `[lo, hi]`, stopping when the
/// bracket is narrower than `tol`.
pub(crate) fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    debug_assert!(flo * f(hi) <= 0.0, "bracket does not straddle a root");
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// First positive zero of `J_0`, `z0 = 2.404825557695773...`.
pub fn j0_first_zero() -> f64 {
    bisect(j0, 2.0, 3.0, 1e-15)
}
