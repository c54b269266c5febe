//! Complementary error function and its scaled form.
//!
//! `erfcx(x) = e^{x²} erfc(x)` stays O(1/x) for large `x`, which is what the
//! log-space structure function of `e^{u²}` needs: `ln F(s) = -s² + ln(√π/2 · erfcx(s))`.

use std::f64::consts::PI;

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Crossover between the Taylor series and the continued fraction.
const SERIES_LIMIT: f64 = 2.0;

/// Scaled complementary error function `e^{x²} erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        // erfc(-x) = 2 - erfc(x)
        let ex2 = (x * x).exp();
        return 2.0 * ex2 - erfcx(-x);
    }
    if x < SERIES_LIMIT {
        (x * x).exp() - erf_scaled_series(x)
    } else {
        1.0 / (SQRT_PI * continued_fraction(x))
    }
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < SERIES_LIMIT {
        1.0 - erf_scaled_series(x) * (-x * x).exp()
    } else {
        (-x * x).exp() * erfcx(x)
    }
}

/// Error function.
pub fn erf(x: f64) -> f64 {
    1.0 - erfc(x)
}

/// `e^{x²} erf(x)` from the all-positive series
/// `erf(x) = 2/√π · e^{-x²} Σ 2^n x^{2n+1} / (1·3···(2n+1))`.
fn erf_scaled_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term <= sum * 1e-17 || n > 500.0 {
            break;
        }
    }
    2.0 / PI.sqrt() * sum
}

/// Evaluates `x + (1/2)/(x + 1/(x + (3/2)/(x + …)))` with modified Lentz.
fn continued_fraction(x: f64) -> f64 {
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for n in 1..2000 {
        let a = n as f64 / 2.0;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    f
}
