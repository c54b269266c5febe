//! Quasi-scaling `u_λ(x) = F⁻¹(λ⁻² F(u(λx)))`, its invariant integral, and
//! the Cole–Hopf type transforms `v = F(u)^{-(A-1)}` and `w = -log F(u)`,
//! each with a finite-difference check of the PDE identity it satisfies.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::fd::{grad_sq, laplacian, time_derivative};
use crate::grid::{Boundary, Geometry, GridError, GridField};
use crate::nonlinearity::{Nonlinearity, NonlinearityError, Source, StructuredSource};
use crate::numerics::richardson_order;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("transform not applicable: {0}")]
    NotApplicable(String),
    #[error("F⁻¹ argument e^{ln_y} leaves the range of F (sup e^{ln_sup}) at x = {position:?}")]
    Range { position: Vec<f64>, ln_y: f64, ln_sup: f64 },
    #[error("value {value} at x = {position:?} is not above the domain floor")]
    NonPositive { position: Vec<f64>, value: f64 },
    #[error("need at least 3 frames, got {0}")]
    NotEnoughFrames(usize),
    #[error("frames must share one grid and have increasing times")]
    FrameMismatch,
    #[error("scale factor must be positive and finite, got {0}")]
    BadLambda(f64),
    #[error(transparent)]
    Nonlinearity(#[from] NonlinearityError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

type Result<T> = std::result::Result<T, TransformError>;

/// Frames at strictly increasing times on one grid shape (extension values
/// may differ between frames).
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    pub times: Vec<f64>,
    pub frames: Vec<GridField>,
}

impl SpaceTimeField {
    pub fn new(times: Vec<f64>, frames: Vec<GridField>) -> Result<Self> {
        if times.len() != frames.len() || frames.is_empty() {
            return Err(TransformError::FrameMismatch);
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(TransformError::FrameMismatch);
        }
        let g0 = &frames[0].geometry;
        if frames.iter().any(|f| !f.geometry.same_shape(g0)) {
            return Err(TransformError::FrameMismatch);
        }
        Ok(SpaceTimeField { times, frames })
    }

    /// Samples `u(x, t)` at the given times.
    pub fn from_fn(geometry: &Geometry, times: &[f64], u: impl Fn(&[f64], f64) -> f64) -> Result<Self> {
        let frames =
            times.iter().map(|&t| GridField::from_fn(geometry.clone(), |x| u(x, t))).collect::<std::result::Result<Vec<_>, _>>()?;
        SpaceTimeField::new(times.to_vec(), frames)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn geometry(&self) -> &Geometry {
        &self.frames[0].geometry
    }

    fn map_frames(&self, times: Vec<f64>, f: impl Fn(&GridField) -> Result<GridField>) -> Result<SpaceTimeField> {
        let frames = self.frames.iter().map(f).collect::<Result<Vec<_>>>()?;
        SpaceTimeField::new(times, frames)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TransformReport {
    pub max_residual: f64,
    /// Same maximum with box-edge nodes excluded (equal on periodic grids).
    pub max_interior_residual: f64,
    /// Time of the frame holding the maximum.
    pub residual_time: f64,
    /// Signed minimum over interior frames (supersolution checks).
    pub min_residual: f64,
    pub min_interior_residual: f64,
    #[serde(skip)]
    pub residual_field: GridField,
    pub order_estimate: Option<f64>,
}

/// Observed order from the residual maxima of three successive halvings.
pub fn residual_order(reports: &[TransformReport]) -> Option<f64> {
    if reports.len() < 3 {
        return None;
    }
    let m = reports.len();
    let r = [reports[m - 3].max_residual, reports[m - 2].max_residual, reports[m - 1].max_residual];
    if r[2] == 0.0 {
        return None;
    }
    // residuals tend to zero, so the Richardson triplet uses the limit 0
    richardson_order(r, 2.0).or_else(|| Some((r[1] / r[2]).log2()))
}

/// Attaches the order of the last three reports to the last one.
pub fn with_order(mut reports: Vec<TransformReport>) -> Vec<TransformReport> {
    let order = residual_order(&reports);
    if let Some(last) = reports.last_mut() {
        last.order_estimate = order;
    }
    reports
}

fn position(g: &Geometry, i: usize) -> Vec<f64> {
    g.position(i)[..g.dim()].to_vec()
}

/// Guarded `F⁻¹(e^{ln_y})`: arguments past `F(floor)` by at most `1e-12`
/// relative are clamped to the floor.
fn inv_guarded(nl: &Nonlinearity, ln_y: f64, at: impl Fn() -> Vec<f64>) -> Result<f64> {
    let sup = nl.ln_structure_sup();
    if ln_y >= sup {
        if ln_y - sup <= 1e-12 * sup.abs().max(1.0) {
            return Ok(nl.domain_floor());
        }
        return Err(TransformError::Range { position: at(), ln_y, ln_sup: sup });
    }
    Ok(nl.structure_inv_ln(ln_y)?)
}

fn map_nodes(u: &GridField, geometry: Geometry, f: impl Fn(usize, f64) -> Result<f64> + Sync) -> Result<GridField> {
    let vals: Vec<Result<f64>> = u.values.par_iter().enumerate().map(|(i, &v)| f(i, v)).collect();
    let values = vals.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(GridField::new(geometry, values)?)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(TransformError::BadLambda(lambda));
    }
    Ok(())
}

/// `F⁻¹(λ⁻² F(s))`.
pub fn quasi_scale_value(nl: &Nonlinearity, lambda: f64, s: f64) -> Result<f64> {
    let ln_y = nl.ln_structure(s)? - 2.0 * lambda.ln();
    inv_guarded(nl, ln_y, Vec::new)
}

/// `x ↦ F⁻¹(λ⁻² F(u₀(λx)))`.
///
/// Periodic data lives on the torus, so the result is placed on the dilated
/// torus (spacing `h/λ`) whose nodes map exactly onto the input nodes. With
/// a constant extension the grid is kept and `u₀(λx)` is interpolated.
pub fn quasi_scale(u0: &GridField, nl: &Nonlinearity, lambda: f64) -> Result<GridField> {
    check_lambda(lambda)?;
    if lambda == 1.0 {
        return Ok(u0.clone());
    }
    let g = &u0.geometry;
    match g.boundary {
        Boundary::Periodic => {
            let out = g.dilated(lambda);
            map_nodes(u0, out, |i, s| {
                let ln_y = nl.ln_structure(s)? - 2.0 * lambda.ln();
                inv_guarded(nl, ln_y, || position(g, i))
            })
        }
        Boundary::ConstantExtension { value } => {
            let ext = quasi_scale_value(nl, lambda, value)?;
            quasi_scale_onto(u0, nl, lambda, &g.with_extension(ext))
        }
    }
}

/// Quasi-scaling sampled on an arbitrary target grid by interpolation.
pub fn quasi_scale_onto(u0: &GridField, nl: &Nonlinearity, lambda: f64, target: &Geometry) -> Result<GridField> {
    check_lambda(lambda)?;
    target.validate()?;
    if target.dim() != u0.dim() {
        return Err(TransformError::Grid(GridError::GeometryMismatch));
    }
    let d = target.dim();
    let vals: Vec<Result<f64>> = (0..target.len())
        .into_par_iter()
        .map(|i| {
            let x = target.position(i);
            let y: Vec<f64> = x[..d].iter().map(|c| c * lambda).collect();
            let s = u0.interpolate(&y);
            let ln_y = nl.ln_structure(s)? - 2.0 * lambda.ln();
            inv_guarded(nl, ln_y, || x[..d].to_vec())
        })
        .collect();
    let values = vals.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(GridField::new(target.clone(), values)?)
}

/// `Σ F(u₀)^{-N/2} h^N` over the box.
pub fn invariant_integral(u0: &GridField, nl: &Nonlinearity, n: usize) -> Result<f64> {
    let half = 0.5 * n as f64;
    let terms: Vec<Result<f64>> = u0.values.par_iter().map(|&s| Ok((-half * nl.ln_structure(s)?).exp())).collect();
    let mut total = 0.0;
    for t in terms {
        total += t?;
    }
    Ok(total * u0.geometry.cell_volume())
}

fn require_power_type(nl: &Nonlinearity) -> Result<f64> {
    let a = nl.a_value();
    if nl.is_exponential_type() || !(a > 1.0) {
        return Err(TransformError::NotApplicable(format!("A = {a}; use the log transform when A = 1")));
    }
    Ok(a)
}

/// `F(s)^{-(A-1)}`.
pub fn cole_hopf_v_value(nl: &Nonlinearity, a: f64, s: f64) -> Result<f64> {
    Ok((-(a - 1.0) * nl.ln_structure(s)?).exp())
}

/// `F⁻¹(v^{-1/(A-1)})`.
pub fn cole_hopf_u_value(nl: &Nonlinearity, a: f64, v: f64) -> Result<f64> {
    if !(v > 0.0) {
        return Err(TransformError::NonPositive { position: Vec::new(), value: v });
    }
    inv_guarded(nl, -v.ln() / (a - 1.0), Vec::new)
}

/// `-log F(s)`.
pub fn log_transform_value(nl: &Nonlinearity, s: f64) -> Result<f64> {
    Ok(-nl.ln_structure(s)?)
}

/// `F⁻¹(e^{-w})`.
pub fn log_transform_inv_value(nl: &Nonlinearity, w: f64) -> Result<f64> {
    inv_guarded(nl, -w, Vec::new)
}

fn map_ext(g: &Geometry, f: impl Fn(f64) -> Result<f64>) -> Result<Geometry> {
    Ok(match g.boundary {
        Boundary::Periodic => g.clone(),
        Boundary::ConstantExtension { value } => g.with_extension(f(value)?),
    })
}

fn locate(g: &Geometry, i: usize, e: TransformError) -> TransformError {
    match e {
        TransformError::Range { ln_y, ln_sup, .. } => TransformError::Range { position: position(g, i), ln_y, ln_sup },
        TransformError::NonPositive { value, .. } => TransformError::NonPositive { position: position(g, i), value },
        other => other,
    }
}

pub fn cole_hopf_v(u: &GridField, nl: &Nonlinearity) -> Result<GridField> {
    let a = require_power_type(nl)?;
    let g = map_ext(&u.geometry, |s| cole_hopf_v_value(nl, a, s))?;
    map_nodes(u, g, |i, s| cole_hopf_v_value(nl, a, s).map_err(|e| locate(&u.geometry, i, e)))
}

pub fn cole_hopf_u(v: &GridField, nl: &Nonlinearity, a: f64) -> Result<GridField> {
    if !(a > 1.0) {
        return Err(TransformError::NotApplicable(format!("A = {a}")));
    }
    let g = map_ext(&v.geometry, |x| cole_hopf_u_value(nl, a, x))?;
    map_nodes(v, g, |i, x| cole_hopf_u_value(nl, a, x).map_err(|e| locate(&v.geometry, i, e)))
}

pub fn log_transform(u: &GridField, nl: &Nonlinearity) -> Result<GridField> {
    let g = map_ext(&u.geometry, |s| log_transform_value(nl, s))?;
    map_nodes(u, g, |i, s| log_transform_value(nl, s).map_err(|e| locate(&u.geometry, i, e)))
}

pub fn log_transform_inv(w: &GridField, nl: &Nonlinearity) -> Result<GridField> {
    let g = map_ext(&w.geometry, |x| log_transform_inv_value(nl, x))?;
    map_nodes(w, g, |i, x| log_transform_inv_value(nl, x).map_err(|e| locate(&w.geometry, i, e)))
}

/// Shared driver: evaluates `residual(k, i, ∂t u, Δu)` on interior frames.
fn residual_over_frames(u: &SpaceTimeField, residual: impl Fn(usize, usize, f64, f64) -> Result<f64> + Sync) -> Result<TransformReport> {
    let m = u.len();
    if m < 3 {
        return Err(TransformError::NotEnoughFrames(m));
    }
    let refs: Vec<&[f64]> = u.frames.iter().map(|f| f.values.as_slice()).collect();
    let g = u.geometry();
    let mut best: Option<(f64, f64, f64, GridField)> = None;
    let (mut min_all, mut min_interior) = (f64::INFINITY, f64::INFINITY);
    for k in 1..m - 1 {
        let ut = time_derivative(&refs, &u.times, k);
        let lap = laplacian(&u.frames[k]);
        let vals: Vec<Result<f64>> = (0..g.len()).into_par_iter().map(|i| residual(k, i, ut[i], lap[i])).collect();
        let vals = vals.into_iter().collect::<Result<Vec<_>>>()?;
        let max = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        min_all = vals.iter().fold(min_all, |a, &v| a.min(v));
        min_interior = vals.iter().enumerate().filter(|(i, _)| g.is_periodic() || !g.is_edge(*i)).fold(min_interior, |a, (_, &v)| a.min(v));
        let interior = vals.iter().enumerate().filter(|(i, _)| g.is_periodic() || !g.is_edge(*i)).fold(0.0f64, |a, (_, v)| a.max(v.abs()));
        let better = best.as_ref().is_none_or(|b| max > b.0);
        let interior_max = best.as_ref().map_or(interior, |b| b.1.max(interior));
        if better {
            let field = GridField::new(u.frames[k].geometry.clone(), vals)?;
            best = Some((max, interior_max, u.times[k], field));
        } else if let Some(b) = best.as_mut() {
            b.1 = interior_max;
        }
    }
    let (max_residual, max_interior_residual, residual_time, residual_field) = best.expect("at least one interior frame");
    Ok(TransformReport {
        max_residual,
        max_interior_residual,
        residual_time,
        min_residual: min_all,
        min_interior_residual: min_interior,
        residual_field,
        order_estimate: None,
    })
}

/// Residual of `∂t u = Δu + g(u)` on the interior frames.
pub fn pde_residual(u: &SpaceTimeField, g: &dyn Source) -> Result<TransformReport> {
    residual_over_frames(u, |k, i, ut, lap| Ok(ut - lap - g.value(u.frames[k].values[i])))
}

/// Builds `u_λ(x, t) = F⁻¹(λ⁻² F(u(λx, λ²t)))` and checks
/// `∂t u_λ - Δu_λ - f(u_λ) = f(u_λ)|∇u|²/(f(u)² F(u)) · (f′F(u) - f′F(u_λ))`,
/// with `u` and `∇u` taken at `(λx, λ²t)`.
pub fn quasi_scaled_residual(u: &SpaceTimeField, nl: &Nonlinearity, lambda: f64) -> Result<TransformReport> {
    check_lambda(lambda)?;
    let floor = nl.domain_floor();
    for f in &u.frames {
        if let Some(i) = f.values.iter().position(|&v| !(v > floor)) {
            return Err(TransformError::NonPositive { position: position(&f.geometry, i), value: f.values[i] });
        }
    }
    let l2 = lambda * lambda;
    let times: Vec<f64> = u.times.iter().map(|t| t / l2).collect();
    let scaled = u.map_frames(times, |f| quasi_scale(f, nl, lambda))?;
    let periodic = u.geometry().is_periodic();
    // u and |∇u|² at (λx, λ²t) for every node of the scaled grid
    let mut base_u = Vec::with_capacity(u.len());
    let mut base_g2 = Vec::with_capacity(u.len());
    for (f, fs) in u.frames.iter().zip(&scaled.frames) {
        let g2 = grad_sq(f);
        if periodic {
            base_u.push(f.values.clone());
            base_g2.push(g2);
        } else {
            let g2f = GridField::new(f.geometry.with_extension(0.0), g2)?;
            let d = f.dim();
            let pts: Vec<Vec<f64>> = (0..fs.len()).map(|i| fs.geometry.position(i)[..d].iter().map(|c| c * lambda).collect()).collect();
            base_u.push(pts.iter().map(|y| f.interpolate(y)).collect());
            base_g2.push(pts.iter().map(|y| g2f.interpolate(y)).collect());
        }
    }
    residual_over_frames(&scaled, |k, i, ut, lap| {
        let ul = scaled.frames[k].values[i];
        let uu = base_u[k][i];
        let fl = nl.f(ul);
        let bracket = nl.fprime_structure(uu)? - nl.fprime_structure(ul)?;
        let coef = if base_g2[k][i] == 0.0 || bracket == 0.0 {
            0.0
        } else {
            (nl.ln_f(ul) + base_g2[k][i].ln() - 2.0 * nl.ln_f(uu) - nl.ln_structure(uu)?).exp() * bracket
        };
        Ok(ut - lap - fl - coef)
    })
}

/// For `v` solving `∂t v = Δv + g(v)`, builds `ũ = F⁻¹(G(v))` and checks
/// `∂t ũ - Δũ - f(ũ) = f(ũ)|∇v|²/(g(v)² F(ũ)) · (g′G(v) - f′F(ũ))`.
pub fn general_transform_residual(v: &SpaceTimeField, g: &dyn StructuredSource, nl: &Nonlinearity) -> Result<TransformReport> {
    let ut = v.map_frames(v.times.clone(), |f| {
        let geom = map_ext(&f.geometry, |x| inv_guarded(nl, g.ln_tail(x)?, Vec::new))?;
        map_nodes(f, geom, |i, x| inv_guarded(nl, g.ln_tail(x)?, || position(&f.geometry, i)))
    })?;
    let grads: Vec<Vec<f64>> = v.frames.iter().map(grad_sq).collect();
    residual_over_frames(&ut, |k, i, dt, lap| {
        let x = v.frames[k].values[i];
        let u = ut.frames[k].values[i];
        let ln_g_tail = g.ln_tail(x)?;
        let gp = g.derivative(x);
        let g_bracket = if gp > 0.0 { (gp.ln() + ln_g_tail).exp() } else { 0.0 };
        let bracket = g_bracket - nl.fprime_structure(u)?;
        let gs = grads[k][i];
        let rhs =
            if gs == 0.0 || bracket == 0.0 { 0.0 } else { (nl.ln_f(u) + gs.ln() - 2.0 * g.value(x).ln() - ln_g_tail).exp() * bracket };
        Ok(dt - lap - nl.f(u) - rhs)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexityMode {
    PowerTransform,
    LogTransform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Convexity {
    Convex,
    Concave,
    /// Second differences vanish to roundoff: both convex and concave.
    Linear,
    Mixed,
}

/// Sign pattern of the second divided differences of `F^{-(A-1)}` or
/// `-log F` on a sorted grid.
pub fn convexity_probe(nl: &Nonlinearity, mode: ConvexityMode, s_grid: &[f64]) -> Result<Convexity> {
    let a = nl.a_value();
    let phi = |s: f64| -> Result<f64> {
        match mode {
            ConvexityMode::PowerTransform => cole_hopf_v_value(nl, a, s),
            ConvexityMode::LogTransform => log_transform_value(nl, s),
        }
    };
    let vals = s_grid.iter().map(|&s| phi(s)).collect::<Result<Vec<_>>>()?;
    let (mut pos, mut negs) = (false, false);
    for k in 1..s_grid.len().saturating_sub(1) {
        let h0 = s_grid[k] - s_grid[k - 1];
        let h1 = s_grid[k + 1] - s_grid[k];
        let c = (vals[k + 1] - vals[k]) / h1 - (vals[k] - vals[k - 1]) / h0;
        let scale = (vals[k + 1].abs() + vals[k].abs()) / h1 + (vals[k].abs() + vals[k - 1].abs()) / h0;
        if c.abs() <= 1e-9 * scale {
            continue;
        }
        if c > 0.0 {
            pos = true;
        } else {
            negs = true;
        }
    }
    Ok(match (pos, negs) {
        (false, false) => Convexity::Linear,
        (true, false) => Convexity::Convex,
        (false, true) => Convexity::Concave,
        (true, true) => Convexity::Mixed,
    })
}
