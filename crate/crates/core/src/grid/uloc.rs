//! Uniformly local norms `sup_y (Σ_{x∈B_ρ(y)} |u(x)|^p h^N)^{1/p}` with ball
//! centres on grid nodes and membership by node inclusion, plus the
//! integrability evidence built from them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Boundary, GridError, GridField};
use crate::nonlinearity::{Kind, Nonlinearity, NonlinearityError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UlocError {
    #[error("ball radius {rho} is below half a cell (h = {h})")]
    EmptyBall { rho: f64, h: f64 },
    #[error("ball of radius {rho} does not fit in the periodic box (axis length {length})")]
    BallExceedsBox { rho: f64, length: f64 },
    #[error("exponent p = {0} must be at least 1")]
    BadExponent(f64),
    #[error("F(u0)^(-r) is not representable at x = {position:?} (u0 = {value})")]
    SingularCell { position: Vec<f64>, value: f64 },
    #[error("need at least 3 refinement levels, got {0}")]
    InsufficientLevels(usize),
    #[error("refinement spacings must decrease")]
    BadLevels,
    #[error(transparent)]
    Nonlinearity(#[from] NonlinearityError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Lebesgue exponent, possibly infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Exponent {
    Finite(f64),
    Infinite(InfTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InfTag {
    #[serde(rename = "inf")]
    Inf,
}

impl Exponent {
    pub const INF: Exponent = Exponent::Infinite(InfTag::Inf);

    /// `1/p`, zero for `p = ∞`.
    pub fn reciprocal(self) -> f64 {
        match self {
            Exponent::Finite(p) => 1.0 / p,
            Exponent::Infinite(_) => 0.0,
        }
    }

    pub fn from_f64(p: f64) -> Exponent {
        if p.is_infinite() {
            Exponent::INF
        } else {
            Exponent::Finite(p)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UlocParams {
    pub p: Exponent,
    pub rho: f64,
}

impl UlocParams {
    pub fn new(p: f64, rho: f64) -> Self {
        UlocParams { p: Exponent::from_f64(p), rho }
    }
}

/// Ball offsets as chords along the last axis: `(d0, d1, half_width)`.
fn ball_chords(dim: usize, r: f64) -> Vec<(isize, isize, isize)> {
    let k = (r + 1e-9).floor() as isize;
    let r2 = r * r + 1e-9;
    let mut out = Vec::new();
    let (lo0, lo1) = match dim {
        1 => (0, 0),
        2 => (0, -k),
        _ => (-k, -k),
    };
    for a in lo0..=-lo0 {
        for b in lo1..=-lo1 {
            let rest = r2 - (a * a + b * b) as f64;
            if rest < 0.0 {
                continue;
            }
            out.push((a, b, rest.sqrt().floor() as isize));
        }
    }
    out
}

/// Number of grid nodes in a ball of radius `rho` (the discrete `|B_ρ|/h^N`).
pub fn ball_node_count(dim: usize, rho: f64, h: f64) -> usize {
    ball_chords(dim, rho / h).iter().map(|c| (2 * c.2 + 1) as usize).sum()
}

/// Sup over node-centred balls of `Σ w h^N`, where `w` is already the
/// pointwise integrand and `outside` its value beyond an extended box.
fn sup_ball_sum(weights: &GridField, rho: f64, outside: f64) -> Result<f64, UlocError> {
    let g = &weights.geometry;
    let h = g.spacing;
    if rho < 0.5 * h {
        return Err(UlocError::EmptyBall { rho, h });
    }
    let dim = g.dim();
    let e = g.extents3();
    let chords = ball_chords(dim, rho / h);
    let k = (rho / h + 1e-9).floor() as usize;
    if g.is_periodic() {
        if let Some(&len) = e[3 - dim..].iter().find(|&&len| 2 * k + 1 > len) {
            return Err(UlocError::BallExceedsBox { rho, length: len as f64 * h });
        }
    }
    let n = e[2];
    let rows = e[0] * e[1];
    // prefix sums per row along the fast axis
    let mut prefix = vec![0.0; rows * (n + 1)];
    for r in 0..rows {
        let base = r * (n + 1);
        for j in 0..n {
            prefix[base + j + 1] = prefix[base + j] + weights.values[r * n + j];
        }
    }
    let periodic = g.is_periodic();
    let chord = |r0: isize, r1: isize, j: isize, c: isize| -> f64 {
        let (n0, n1, ni) = (e[0] as isize, e[1] as isize, n as isize);
        let (lo, hi) = (j - c, j + c);
        if periodic {
            let row = (r0.rem_euclid(n0) * n1 + r1.rem_euclid(n1)) as usize;
            let p = &prefix[row * (n + 1)..(row + 1) * (n + 1)];
            if lo >= 0 && hi < ni {
                p[(hi + 1) as usize] - p[lo as usize]
            } else if lo < 0 {
                (p[n] - p[(ni + lo) as usize]) + p[(hi + 1) as usize]
            } else {
                (p[n] - p[lo as usize]) + p[(hi - ni + 1) as usize]
            }
        } else {
            if r0 < 0 || r0 >= n0 || r1 < 0 || r1 >= n1 {
                return (2 * c + 1) as f64 * outside;
            }
            let row = (r0 * n1 + r1) as usize;
            let p = &prefix[row * (n + 1)..(row + 1) * (n + 1)];
            let a = lo.max(0);
            let b = hi.min(ni - 1);
            let inside = if a <= b { p[(b + 1) as usize] - p[a as usize] } else { 0.0 };
            let missing = (2 * c + 1) - (b - a + 1).max(0);
            inside + missing as f64 * outside
        }
    };
    let sums: Vec<f64> = (0..g.len())
        .into_par_iter()
        .map(|flat| {
            let idx = g.unravel(flat);
            let (i0, i1, j) = (idx[0] as isize, idx[1] as isize, idx[2] as isize);
            chords.iter().map(|&(a, b, c)| chord(i0 + a, i1 + b, j, c)).sum::<f64>()
        })
        .collect();
    let best = sums.into_iter().fold(f64::NEG_INFINITY, f64::max);
    Ok(best.max(0.0) * g.cell_volume())
}

/// The uniformly local `L^p` norm on the grid.
pub fn uloc_norm(u: &GridField, params: UlocParams) -> Result<f64, UlocError> {
    let h = u.spacing();
    if params.rho < 0.5 * h {
        return Err(UlocError::EmptyBall { rho: params.rho, h });
    }
    let outside = match u.geometry.boundary {
        Boundary::Periodic => 0.0,
        Boundary::ConstantExtension { value } => value,
    };
    match params.p {
        Exponent::Infinite(_) => {
            let m = u.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            Ok(if u.geometry.is_periodic() { m } else { m.max(outside.abs()) })
        }
        Exponent::Finite(p) => {
            if !(p >= 1.0) {
                return Err(UlocError::BadExponent(p));
            }
            let w = GridField { geometry: u.geometry.clone(), values: u.values.iter().map(|v| v.abs().powf(p)).collect() };
            let s = sup_ball_sum(&w, params.rho, outside.abs().powf(p))?;
            Ok(s.powf(1.0 / p))
        }
    }
}

/// `‖φ(u)‖_{1,ul,ρ}` for a pointwise map `φ ≥ 0` applied to `u` and to its
/// extension value.
pub fn uloc_l1_of(u: &GridField, rho: f64, phi: impl Fn(f64) -> f64 + Sync) -> Result<f64, UlocError> {
    let w = GridField { geometry: u.geometry.clone(), values: u.values.par_iter().map(|&v| phi(v)).collect() };
    let outside = match u.geometry.boundary {
        Boundary::Periodic => 0.0,
        Boundary::ConstantExtension { value } => phi(value),
    };
    sup_ball_sum(&w, rho, outside)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationIntegral {
    pub value: f64,
    /// Cells lifted to the floor cap because `F` is infinite at the floor.
    pub capped_cells: usize,
    pub floor_cap: Option<f64>,
}

/// `‖F(u₀)^{-r}‖_{1,ul,ρ}`.
pub fn classification_integral(u0: &GridField, nl: &Nonlinearity, r: f64, rho: f64) -> Result<ClassificationIntegral, UlocError> {
    if !(r > 0.0) {
        return Err(UlocError::BadExponent(r));
    }
    let floor = nl.domain_floor();
    let mut cap = None;
    if let Kind::Custom(_) = nl.kind() {
        let finite_at_floor = nl.ln_structure_sup().is_finite();
        if !finite_at_floor {
            let smallest = u0.values.iter().cloned().filter(|&v| v > floor).fold(f64::INFINITY, f64::min);
            let eps = if smallest.is_finite() { (smallest - floor) * 1e-6 } else { 1e-6 };
            cap = Some(floor + eps);
        }
    }
    let mut capped = 0usize;
    let mut w = Vec::with_capacity(u0.len());
    for (i, &v) in u0.values.iter().enumerate() {
        let s = match cap {
            Some(c) if v <= floor => {
                capped += 1;
                c
            }
            _ => v,
        };
        let lf = nl.ln_structure(s)?;
        let val = (-r * lf).exp();
        if !val.is_finite() {
            let d = u0.dim();
            return Err(UlocError::SingularCell { position: u0.geometry.position(i)[..d].to_vec(), value: v });
        }
        w.push(val);
    }
    let outside = match u0.geometry.boundary {
        Boundary::Periodic => 0.0,
        Boundary::ConstantExtension { value } => {
            let s = match cap {
                Some(c) if value <= floor => c,
                _ => value,
            };
            (-r * nl.ln_structure(s)?).exp()
        }
    };
    let field = GridField { geometry: u0.geometry.clone(), values: w };
    let value = sup_ball_sum(&field, rho, outside)?;
    Ok(ClassificationIntegral { value, capped_cells: capped, floor_cap: cap })
}

/// What a sequence of refined integrals says about the continuum integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "trend", rename_all = "snake_case")]
pub enum Trend {
    Converging {
        limit: f64,
        order: Option<f64>,
    },
    /// Values grow like `h^{-rate}`, or like `log(1/h)` when `logarithmic`.
    Diverging {
        rate: f64,
        logarithmic: bool,
    },
    /// Increments that neither shrink nor build up monotonically.
    Ambiguous {
        exponent: f64,
    },
}

impl Trend {
    pub fn is_converging(&self) -> bool {
        matches!(self, Trend::Converging { .. })
    }

    pub fn is_diverging(&self) -> bool {
        matches!(self, Trend::Diverging { .. })
    }
}

/// Minimum exponent for either verdict.
pub const TREND_THRESHOLD: f64 = 0.1;

/// Classifies `(h, value)` pairs (spacing decreasing) by their last three.
pub fn refine_trend(levels: &[(f64, f64)]) -> Result<Trend, UlocError> {
    if levels.len() < 3 {
        return Err(UlocError::InsufficientLevels(levels.len()));
    }
    if levels.windows(2).any(|w| !(w[1].0 < w[0].0)) {
        return Err(UlocError::BadLevels);
    }
    let m = levels.len();
    let (h1, v1) = levels[m - 3];
    let (h2, v2) = levels[m - 2];
    let (_, v3) = levels[m - 1];
    let ratio = h1 / h2;
    let d1 = v2 - v1;
    let d2 = v3 - v2;
    let scale = v3.abs().max(f64::MIN_POSITIVE);
    if d2.abs() <= 1e-12 * scale {
        return Ok(Trend::Converging { limit: v3, order: None });
    }
    if d1.abs() <= 1e-12 * scale {
        return Ok(Trend::Ambiguous { exponent: f64::NAN });
    }
    if d1.signum() != d2.signum() {
        return Ok(if d2.abs() < d1.abs() {
            Trend::Converging { limit: v3, order: None }
        } else {
            Trend::Ambiguous { exponent: f64::NAN }
        });
    }
    let q = (d1.abs() / d2.abs()).ln() / ratio.ln();
    if q > TREND_THRESHOLD {
        let limit = v3 + d2 / (ratio.powf(q) - 1.0);
        Ok(Trend::Converging { limit, order: Some(q) })
    } else if v3.abs() > v2.abs() && v2.abs() > v1.abs() {
        // increments that do not shrink: power growth, or log growth when flat
        Ok(Trend::Diverging { rate: (-q).max(0.0), logarithmic: -q <= TREND_THRESHOLD })
    } else {
        Ok(Trend::Ambiguous { exponent: q })
    }
}
