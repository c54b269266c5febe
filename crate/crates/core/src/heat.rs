//! The heat semigroup `e^{tΔ}` on grid fields.
//!
//! Three realisations:
//! * `SpectralPeriodic`: multiplier `e^{-t|ξ|²}` on the torus.
//! * `LatticePeriodic`: the exact semigroup of the second-order discrete
//!   Laplacian, multiplier `exp(-t Σ (4/h²) sin²(πk/n))`. Its kernel is
//!   positive for every `t`, which the solvers rely on.
//! * `DirectKernel`: separable truncated Gaussian convolution, for boxes
//!   with a constant extension.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::uloc::{uloc_norm, Exponent, UlocError, UlocParams};
use crate::grid::{Boundary, Geometry, GridError, GridField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeatError {
    #[error("time must be nonnegative and finite, got {0}")]
    BadTime(f64),
    #[error("kernel cutoff {cutoff} is below 6·sqrt(2t) = {required}")]
    CutoffTooSmall { cutoff: f64, required: f64 },
    #[error("{method} needs a periodic grid")]
    UnsupportedBoundary { method: &'static str },
    #[error("input field has a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("field has zero norm")]
    ZeroField,
    #[error("bad exponents p = {p}, q = {q}")]
    BadExponents { p: f64, q: f64 },
    #[error(transparent)]
    Uloc(#[from] UlocError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemigroupMethod {
    SpectralPeriodic,
    LatticePeriodic,
    DirectKernel { kernel_cutoff_radius: f64 },
}

impl SemigroupMethod {
    fn label(&self) -> &'static str {
        match self {
            SemigroupMethod::SpectralPeriodic => "spectral_periodic",
            SemigroupMethod::LatticePeriodic => "lattice_periodic",
            SemigroupMethod::DirectKernel { .. } => "direct_kernel",
        }
    }

    /// Spectral on periodic grids, a `6√(2t)` truncated kernel otherwise.
    pub fn default_for(geometry: &Geometry, t: f64) -> SemigroupMethod {
        if geometry.is_periodic() {
            SemigroupMethod::SpectralPeriodic
        } else {
            SemigroupMethod::DirectKernel { kernel_cutoff_radius: min_cutoff(t) }
        }
    }

    /// The positive-kernel choice used inside the solvers.
    pub fn positive_for(geometry: &Geometry, t: f64) -> SemigroupMethod {
        if geometry.is_periodic() {
            SemigroupMethod::LatticePeriodic
        } else {
            SemigroupMethod::DirectKernel { kernel_cutoff_radius: min_cutoff(t) }
        }
    }
}

/// Smallest admissible `DirectKernel` cutoff at time `t`.
pub fn min_cutoff(t: f64) -> f64 {
    6.0 * (2.0 * t).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemigroupPlan {
    pub method: SemigroupMethod,
    pub t: f64,
}

impl SemigroupPlan {
    pub fn new(method: SemigroupMethod, t: f64) -> Result<Self, HeatError> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(HeatError::BadTime(t));
        }
        if let SemigroupMethod::DirectKernel { kernel_cutoff_radius } = method {
            // rounding slack so that min_cutoff(t) itself passes
            if kernel_cutoff_radius < min_cutoff(t) * (1.0 - 1e-12) {
                return Err(HeatError::CutoffTooSmall { cutoff: kernel_cutoff_radius, required: min_cutoff(t) });
            }
        }
        Ok(SemigroupPlan { method, t })
    }

    pub fn default_for(geometry: &Geometry, t: f64) -> Result<Self, HeatError> {
        SemigroupPlan::new(SemigroupMethod::default_for(geometry, t), t)
    }
}

enum Operator {
    Identity,
    /// Per-axis (padded to three) multipliers.
    Fourier {
        mult: [Vec<f64>; 3],
        fwd: [Option<Arc<dyn Fft<f64>>>; 3],
        inv: [Option<Arc<dyn Fft<f64>>>; 3],
    },
    /// Per-axis normalised weights for offsets `-k..=k`.
    Direct {
        weights: Vec<f64>,
        outside: Option<f64>,
    },
}

/// `e^{tΔ}` prepared for one geometry; reusable across fields.
pub struct HeatPropagator {
    geometry: Geometry,
    plan: SemigroupPlan,
    op: Operator,
}

impl std::fmt::Debug for HeatPropagator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HeatPropagator").field("geometry", &self.geometry).field("plan", &self.plan).finish()
    }
}

fn signed_freq(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

impl HeatPropagator {
    pub fn new(geometry: &Geometry, plan: SemigroupPlan) -> Result<Self, HeatError> {
        let plan = SemigroupPlan::new(plan.method, plan.t)?;
        let t = plan.t;
        let h = geometry.spacing;
        let e = geometry.extents3();
        let off = 3 - geometry.dim();
        let op = if t == 0.0 {
            Operator::Identity
        } else {
            match plan.method {
                SemigroupMethod::SpectralPeriodic | SemigroupMethod::LatticePeriodic => {
                    if !geometry.is_periodic() {
                        return Err(HeatError::UnsupportedBoundary { method: plan.method.label() });
                    }
                    let mut planner = FftPlanner::new();
                    let mut mult: [Vec<f64>; 3] = [vec![1.0], vec![1.0], vec![1.0]];
                    let mut fwd: [Option<Arc<dyn Fft<f64>>>; 3] = [None, None, None];
                    let mut inv: [Option<Arc<dyn Fft<f64>>>; 3] = [None, None, None];
                    for a in off..3 {
                        let n = e[a];
                        let len = n as f64 * h;
                        mult[a] = (0..n)
                            .map(|k| {
                                let sym = match plan.method {
                                    SemigroupMethod::SpectralPeriodic => {
                                        let xi = 2.0 * std::f64::consts::PI * signed_freq(k, n) / len;
                                        xi * xi
                                    }
                                    _ => {
                                        let s = (std::f64::consts::PI * k as f64 / n as f64).sin();
                                        4.0 * s * s / (h * h)
                                    }
                                };
                                (-t * sym).exp()
                            })
                            .collect();
                        if n > 1 {
                            fwd[a] = Some(planner.plan_fft_forward(n));
                            inv[a] = Some(planner.plan_fft_inverse(n));
                        }
                    }
                    Operator::Fourier { mult, fwd, inv }
                }
                SemigroupMethod::DirectKernel { kernel_cutoff_radius } => {
                    let k = (kernel_cutoff_radius / h).floor() as isize;
                    let mut w: Vec<f64> = (-k..=k)
                        .map(|j| {
                            let x = j as f64 * h;
                            (-x * x / (4.0 * t)).exp()
                        })
                        .collect();
                    let total: f64 = w.iter().sum();
                    w.iter_mut().for_each(|v| *v /= total);
                    let outside = match geometry.boundary {
                        Boundary::Periodic => None,
                        Boundary::ConstantExtension { value } => Some(value),
                    };
                    Operator::Direct { weights: w, outside }
                }
            }
        };
        Ok(HeatPropagator { geometry: geometry.clone(), plan, op })
    }

    pub fn plan(&self) -> SemigroupPlan {
        self.plan
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn apply(&self, u: &GridField) -> Result<GridField, HeatError> {
        if u.geometry != self.geometry {
            return Err(HeatError::Grid(GridError::GeometryMismatch));
        }
        let mut v = u.values.clone();
        self.apply_values(&mut v)?;
        Ok(GridField { geometry: u.geometry.clone(), values: v })
    }

    /// In-place on a flat value array laid out like the geometry.
    pub fn apply_values(&self, values: &mut [f64]) -> Result<(), HeatError> {
        self.apply_values_with_outside(values, None)
    }

    /// As `apply_values`, with the constant beyond an extended box replaced by
    /// `outside` (ignored on periodic grids).
    pub fn apply_values_with_outside(&self, values: &mut [f64], outside_override: Option<f64>) -> Result<(), HeatError> {
        if values.len() != self.geometry.len() {
            return Err(HeatError::Grid(GridError::LengthMismatch { expected: self.geometry.len(), got: values.len() }));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(HeatError::NonFinite(i));
        }
        let e = self.geometry.extents3();
        match &self.op {
            Operator::Identity => {}
            Operator::Fourier { mult, fwd, inv } => {
                let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
                for (a, f) in fwd.iter().enumerate() {
                    if let Some(f) = f {
                        along_axis(&mut buf, e, a, |line| f.process(line));
                    }
                }
                let (m0, m1, m2) = (&mult[0], &mult[1], &mult[2]);
                let (e1, e2) = (e[1], e[2]);
                buf.par_iter_mut().enumerate().for_each(|(flat, z)| {
                    let i0 = flat / (e1 * e2);
                    let i1 = (flat / e2) % e1;
                    let i2 = flat % e2;
                    *z *= m0[i0] * m1[i1] * m2[i2];
                });
                for (a, f) in inv.iter().enumerate() {
                    if let Some(f) = f {
                        along_axis(&mut buf, e, a, |line| f.process(line));
                    }
                }
                let scale = 1.0 / values.len() as f64;
                for (v, z) in values.iter_mut().zip(&buf) {
                    *v = z.re * scale;
                }
            }
            Operator::Direct { weights, outside } => {
                let outside = outside.map(|c| outside_override.unwrap_or(c));
                let off = 3 - self.geometry.dim();
                for a in off..3 {
                    convolve_axis(values, e, a, weights, outside);
                }
            }
        }
        Ok(())
    }
}

/// Runs `op` on every line along axis `a` (gather, transform, scatter).
fn along_axis<T: Copy + Send + Sync + Default>(buf: &mut [T], e: [usize; 3], a: usize, op: impl Fn(&mut [T]) + Sync) {
    let n = e[a];
    let stride: usize = e[a + 1..].iter().product();
    let lines = buf.len() / n;
    if stride == 1 {
        buf.par_chunks_mut(n).for_each(&op);
        return;
    }
    let src: &[T] = buf;
    let done: Vec<Vec<T>> = (0..lines)
        .into_par_iter()
        .map(|l| {
            let base = (l / stride) * n * stride + l % stride;
            let mut line: Vec<T> = (0..n).map(|k| src[base + k * stride]).collect();
            op(&mut line);
            line
        })
        .collect();
    for (l, line) in done.into_iter().enumerate() {
        let base = (l / stride) * n * stride + l % stride;
        for (k, v) in line.into_iter().enumerate() {
            buf[base + k * stride] = v;
        }
    }
}

fn convolve_axis(values: &mut [f64], e: [usize; 3], a: usize, w: &[f64], outside: Option<f64>) {
    let k = (w.len() / 2) as isize;
    along_axis(values, e, a, |line| {
        let n = line.len() as isize;
        let src = line.to_vec();
        for (i, out) in line.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, wj) in w.iter().enumerate() {
                let idx = i as isize + j as isize - k;
                let v = if (0..n).contains(&idx) {
                    src[idx as usize]
                } else {
                    match outside {
                        Some(c) => c,
                        None => src[idx.rem_euclid(n) as usize],
                    }
                };
                acc += wj * v;
            }
            *out = acc;
        }
    });
}

/// One-shot `e^{tΔ}u`.
pub fn apply_semigroup(u: &GridField, t: f64, plan: SemigroupPlan) -> Result<GridField, HeatError> {
    if t == 0.0 {
        if let Some(i) = u.values.iter().position(|v| !v.is_finite()) {
            return Err(HeatError::NonFinite(i));
        }
        return Ok(u.clone());
    }
    let plan = SemigroupPlan::new(plan.method, t)?;
    HeatPropagator::new(&u.geometry, plan)?.apply(u)
}

/// `‖e^{tΔ}u‖_{q,ul,ρ} / ((ρ^{-Nθ} + t^{-Nθ/2})‖u‖_{p,ul,ρ})` with `θ = 1/p - 1/q`.
pub fn smoothing_ratio(u: &GridField, t: f64, p: Exponent, q: Exponent, rho: f64, method: SemigroupMethod) -> Result<f64, HeatError> {
    let (pr, qr) = (p.reciprocal(), q.reciprocal());
    let valid = |x: Exponent| match x {
        Exponent::Finite(v) => v >= 1.0,
        Exponent::Infinite(_) => true,
    };
    if !(valid(p) && valid(q)) || qr > pr {
        return Err(HeatError::BadExponents { p: 1.0 / pr, q: 1.0 / qr });
    }
    if !(t > 0.0) {
        return Err(HeatError::BadTime(t));
    }
    let denom_norm = uloc_norm(u, UlocParams { p, rho })?;
    if denom_norm == 0.0 {
        return Err(HeatError::ZeroField);
    }
    let evolved = apply_semigroup(u, t, SemigroupPlan::new(method, t)?)?;
    let num = uloc_norm(&evolved, UlocParams { p: q, rho })?;
    let n = u.dim() as f64;
    let theta = pr - qr;
    let pref = rho.powf(-n * theta) + t.powf(-0.5 * n * theta);
    Ok(num / (pref * denom_norm))
}

#[derive(Debug, Clone)]
pub struct JensenReport {
    /// `J(e^{tΔ}u)`.
    pub lhs: GridField,
    /// `e^{tΔ}J(u)`.
    pub rhs: GridField,
    pub violations: usize,
    pub worst_excess: f64,
}

/// Relative tolerance for the pointwise Jensen comparison.
pub const TOL_JENSEN: f64 = 1e-10;

/// Compares `J(e^{tΔ}u)` with `e^{tΔ}J(u)`: `≤` for convex `J`, `≥` for concave.
pub fn jensen_check(
    u: &GridField,
    t: f64,
    j: impl Fn(f64) -> f64 + Sync,
    convex: bool,
    method: SemigroupMethod,
) -> Result<JensenReport, HeatError> {
    let prop = HeatPropagator::new(&u.geometry, SemigroupPlan::new(method, t)?)?;
    let lhs = prop.apply(u)?;
    let lhs = GridField { geometry: lhs.geometry, values: lhs.values.par_iter().map(|&v| j(v)).collect() };
    let ju = u.map(&j)?;
    let rhs = prop.apply(&ju)?;
    let scale = 1.0 + rhs.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut violations = 0;
    let mut worst = 0.0f64;
    for (l, r) in lhs.values.iter().zip(&rhs.values) {
        let excess = if convex { l - r } else { r - l };
        worst = worst.max(excess);
        if excess > TOL_JENSEN * scale {
            violations += 1;
        }
    }
    Ok(JensenReport { lhs, rhs, violations, worst_excess: worst })
}
