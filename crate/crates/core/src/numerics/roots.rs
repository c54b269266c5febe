//! Bracketing root finders for monotone scalar maps.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RootError {
    #[error("no sign change found while expanding the bracket ({tries} tries)")]
    NoBracket { tries: usize },
    #[error("root finder did not converge in {iterations} iterations")]
    NonConvergent { iterations: usize },
    #[error("function value is not finite at x = {x}")]
    NonFinite { x: f64 },
}

const MAX_ITER: usize = 200;

/// Brent's method on `[a, b]` with `f(a)` and `f(b)` of opposite sign (or zero).
pub fn brent<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, xtol: f64) -> Result<f64, RootError> {
    let mut fa = f(a);
    let mut fb = f(b);
    if !fa.is_finite() {
        return Err(RootError::NonFinite { x: a });
    }
    if !fb.is_finite() {
        return Err(RootError::NonFinite { x: b });
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(RootError::NoBracket { tries: 0 });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..MAX_ITER {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(RootError::NonFinite { x: b });
        }
    }
    Err(RootError::NonConvergent { iterations: MAX_ITER })
}

/// Grows `[lo, hi]` geometrically (in the caller's variable) until `f` changes
/// sign. `step` maps the current endpoint to the next candidate.
pub fn expand_upward<F: Fn(f64) -> f64>(f: &F, start: f64, step: impl Fn(f64) -> f64, max_tries: usize) -> Result<(f64, f64), RootError> {
    let s0 = f(start).signum();
    let mut prev = start;
    let mut x = step(start);
    for _ in 0..max_tries {
        let v = f(x);
        if v.is_nan() {
            return Err(RootError::NonFinite { x });
        }
        if v == 0.0 || v.signum() != s0 {
            return Ok((prev, x));
        }
        prev = x;
        x = step(x);
    }
    Err(RootError::NoBracket { tries: max_tries })
}

/// Plain bisection; used where only monotonicity (not continuity of the
/// derivative) is guaranteed.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, rel_tol: f64) -> Result<f64, RootError> {
    let flo = f(lo);
    let fhi = f(hi);
    if flo.signum() == fhi.signum() && flo != 0.0 && fhi != 0.0 {
        return Err(RootError::NoBracket { tries: 0 });
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= rel_tol * mid.abs().max(f64::MIN_POSITIVE) || mid == lo || mid == hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(RootError::NonConvergent { iterations: 2000 })
}
