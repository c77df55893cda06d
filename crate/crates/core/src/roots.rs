//! Scalar bracketing helpers shared by the fixed-point and flip solvers.

use crate::error::{Error, Result};

/// Bisection on `[lo, hi]`, requiring a sign change of `f`.
///
/// Stops once the bracket is narrower than `xtol`, after `max_iter` halvings,
/// or on an exact zero.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, xtol: f64, max_iter: usize, what: &'static str) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if !(flo.is_finite() && fhi.is_finite()) || flo.signum() == fhi.signum() {
        return Err(Error::Bracket { what, lo, hi });
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= xtol || mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Sub-intervals of a uniform `n`-cell grid on `[lo, hi]` where `f` changes sign.
pub fn sign_changes<F>(mut f: F, lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let h = (hi - lo) / n as f64;
    let mut out = Vec::new();
    let mut a = lo;
    let mut fa = f(a);
    for k in 1..=n {
        let b = if k == n { hi } else { lo + h * k as f64 };
        let fb = f(b);
        if fa.is_finite() && fb.is_finite() && (fa == 0.0 || fa.signum() != fb.signum()) {
            out.push((a, b));
        }
        a = b;
        fa = fb;
    }
    out
}
