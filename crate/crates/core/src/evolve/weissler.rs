use serde::Serialize;

use super::{EvolveError, Result};
use crate::grid::GridField;
use crate::heat::{apply_semigroup, SemigroupMethod, SemigroupPlan};
use crate::numerics::linear_fit;
use crate::singular::ConvexGrowth;

/// Tail bound at which the `C_k` partial sum stops.
const CK_TAIL: f64 = 1e-12;

/// `a₁ = k + 1`, `a_{l+1} = k·a_l + 1`, for `l = 1..=n`.
pub fn weissler_a(k: u32, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut a = k as f64 + 1.0;
    for _ in 0..n {
        out.push(a);
        a = k as f64 * a + 1.0;
    }
    out
}

/// `a_l = (k/(k-1))·k^l - 1/(k-1)`.
pub fn weissler_a_closed(k: u32, l: i32) -> f64 {
    let k = k as f64;
    k / (k - 1.0) * k.powi(l) - 1.0 / (k - 1.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct CkSum {
    pub k: u32,
    pub value: f64,
    pub partial_sums: Vec<f64>,
    /// Bound on the omitted tail when the sum stopped.
    pub tail_bound: f64,
}

fn ln_factorial(k: u32) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// `Σ_{i>n} (ln k! + (i+1) ln k)·k^{-i}`, which dominates the tail because
/// `a_i ≤ k^{i+1}`.
fn tail_bound(k: u32, n: usize) -> f64 {
    let (lk, lf) = ((k as f64).ln(), ln_factorial(k));
    let x = 1.0 / k as f64;
    let xn = x.powi(n as i32 + 1);
    let geo = xn / (1.0 - x);
    // Σ_{i>n} i x^i
    let lin = xn * ((n as f64 + 1.0) - n as f64 * x) / ((1.0 - x) * (1.0 - x));
    lf * geo + lk * (lin + geo)
}

/// `C_k = Σ_{i≥1} k^{-i} log(k!·a_i)`.
pub fn weissler_ck(k: u32) -> Result<CkSum> {
    if k < 2 {
        return Err(EvolveError::BadConfig(format!("k = {k} must be at least 2")));
    }
    let lf = ln_factorial(k);
    let mut sum = 0.0;
    let mut partial_sums = Vec::new();
    let mut n = 0usize;
    loop {
        n += 1;
        let ln_a = weissler_a_closed(k, n as i32).ln();
        sum += (lf + ln_a) / (k as f64).powi(n as i32);
        partial_sums.push(sum);
        let tail = tail_bound(k, n);
        if tail < CK_TAIL {
            return Ok(CkSum { k, value: sum, partial_sums, tail_bound: tail });
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub k: u32,
    pub c_k: f64,
    /// `C` in `g(s) ≥ C·s`, extracted from samples.
    pub c_growth: f64,
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    /// Largest listed `t` with `lhs > rhs` at it and at every smaller one.
    pub t_star: Option<f64>,
    pub violated: bool,
    /// `lhs > rhs` at every listed time.
    pub violated_everywhere: bool,
    /// Fitted slope of `lhs` against `log(1/t)`.
    pub lhs_slope: f64,
    pub label: String,
}

/// Compares `max e^{tΔ}u₀` with the bound
/// `g⁻¹((k/(k-1)) log(1/t) + C_k - (k/(k-1)) log C)` that every solution of
/// `∂t u = Δu + e^{g(u)}` would force.
pub fn weissler_certificate(
    u0: &GridField,
    g: &ConvexGrowth,
    k: u32,
    times: &[f64],
    method: Option<SemigroupMethod>,
) -> Result<Certificate> {
    if times.len() < 2 || times.windows(2).any(|w| !(w[1] < w[0])) || times.iter().any(|t| !(*t > 0.0)) {
        return Err(EvolveError::BadConfig("times must be positive and strictly decreasing".into()));
    }
    if let Some(i) = u0.values.iter().position(|&v| v < g.s0) {
        return Err(EvolveError::BadConfig(format!("u0 below s0 at index {i}")));
    }
    let ck = weissler_ck(k)?;
    let c = g.growth_constant();
    if !(c > 0.0) {
        return Err(EvolveError::BadConfig(format!("growth constant C = {c}")));
    }
    let r = k as f64 / (k as f64 - 1.0);
    let mut lhs = Vec::with_capacity(times.len());
    let mut rhs = Vec::with_capacity(times.len());
    for &t in times {
        let m = method.unwrap_or_else(|| SemigroupMethod::default_for(&u0.geometry, t));
        lhs.push(apply_semigroup(u0, t, SemigroupPlan::new(m, t)?)?.max());
        rhs.push(g.g_inv(r * (1.0 / t).ln() + ck.value - r * c.ln())?);
    }
    let above: Vec<bool> = lhs.iter().zip(&rhs).map(|(l, r)| l > r).collect();
    // times decrease, so "every smaller t" is a suffix
    let start = above.iter().rposition(|&b| !b).map_or(0, |i| i + 1);
    let t_star = (start < times.len()).then(|| times[start]);
    let x: Vec<f64> = times.iter().map(|t| (1.0 / t).ln()).collect();
    let lhs_slope = linear_fit(&x, &lhs).0;
    Ok(Certificate {
        k,
        c_k: ck.value,
        c_growth: c,
        times: times.to_vec(),
        lhs,
        rhs,
        t_star,
        violated: t_star.is_some(),
        violated_everywhere: start == 0,
        lhs_slope,
        label: "numerical evidence at the grid resolution".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recurrence_and_closed_form_agree() {
        let a = weissler_a(2, 20);
        for (l, v) in a.iter().enumerate() {
            assert_eq!(*v, 2f64.powi(l as i32 + 2) - 1.0);
            assert_eq!(*v, weissler_a_closed(2, l as i32 + 1));
        }
        let a3 = weissler_a(3, 10);
        for (l, v) in a3.iter().enumerate() {
            assert!((v - weissler_a_closed(3, l as i32 + 1)).abs() < 1e-9);
        }
    }

    #[test]
    fn c2_partial_sums() {
        let s = weissler_ck(2).unwrap();
        let oracle: f64 = (1..200).map(|i| (2.0 * (2f64.powi(i + 1) - 1.0)).ln() / 2f64.powi(i)).sum();
        assert!((s.value - oracle).abs() < 1e-12);
        assert!(s.tail_bound < 1e-12);
        assert!(((6f64).ln() / 2.0 - s.partial_sums[0]).abs() < 1e-15);
    }

    #[test]
    fn tail_bound_dominates_the_true_tail() {
        for k in [2u32, 3, 5] {
            let full = weissler_ck(k).unwrap();
            for n in [3usize, 8, 15] {
                if n < full.partial_sums.len() {
                    let true_tail = full.value - full.partial_sums[n - 1];
                    assert!(true_tail <= tail_bound(k, n) + 1e-15);
                }
            }
        }
    }
}
