//! Small numerical toolkit shared by the analysis modules.

pub mod quad;
pub mod roots;
pub mod special;

/// `n` points geometrically spaced from `a` to `b` inclusive.
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(a > 0.0 && b > a && n >= 2);
    let (la, lb) = (a.ln(), b.ln());
    (0..n).map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Observed order from three successive values at refinement ratio `ratio`,
/// treating the sequence as `v(h) = v* + c·h^q`.
pub fn richardson_order(v: [f64; 3], ratio: f64) -> Option<f64> {
    let d1 = v[1] - v[0];
    let d2 = v[2] - v[1];
    if d1 == 0.0 || d2 == 0.0 || d1.signum() != d2.signum() {
        return None;
    }
    Some((d1 / d2).ln() / ratio.ln())
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x + (-x).exp()
    } else {
        x.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn richardson_recovers_order() {
        let v = |h: f64| 1.0 + 3.0 * h * h;
        let q = richardson_order([v(0.1), v(0.05), v(0.025)], 2.0).unwrap();
        assert!((q - 2.0).abs() < 1e-9);
    }

    #[test]
    fn fit_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let (m, c) = linear_fit(&x, &y);
        assert!((m - 2.5).abs() < 1e-14 && (c + 1.0).abs() < 1e-14);
    }

    #[test]
    fn softplus_limits() {
        assert!((softplus(-50.0) - (-50f64).exp()).abs() < 1e-30);
        assert_eq!(softplus(800.0), 800.0);
    }
}
