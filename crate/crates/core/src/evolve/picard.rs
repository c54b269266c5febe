use rayon::prelude::*;
use serde::Serialize;

use super::{argmax, check_nonnegative, frame, outside_value, DuhamelRule, EvolveConfig, EvolveError, Propagators, Result};
use crate::grid::GridField;
use crate::nonlinearity::{Nonlinearity, Source};
use crate::transforms::SpaceTimeField;

/// Relative slack for the pointwise `u_{n+1} ≥ u_n` check.
const TOL_MONOTONE: f64 = 1e-12;
/// `sup gap < TOL_CONVERGED·(1 + sup u)` ends the iteration.
const TOL_CONVERGED: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PicardStatus {
    Converged,
    /// `max_picard` reached with gaps still shrinking.
    SlowConvergence,
    /// `max_picard` reached without shrinking gaps.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct PicardState {
    /// `u₁ = 0, u₂, …` when `keep_iterates` is set, otherwise the last one.
    pub iterates: Vec<SpaceTimeField>,
    /// Last iterate at the output frames.
    pub solution: SpaceTimeField,
    /// `monotone_flags[n]`: `u_{n+2} ≥ u_{n+1} - tol` everywhere.
    pub monotone_flags: Vec<bool>,
    /// Smallest `u_{n+2} - u_{n+1}` over all nodes and steps.
    pub min_increments: Vec<f64>,
    /// Largest `|u_{n+2} - u_{n+1}|` over all nodes and steps.
    pub gaps: Vec<f64>,
    /// Largest `u_{n+1} - u_n` at the final time, last pair.
    pub sup_gap: f64,
    pub status: PicardStatus,
}

impl PicardState {
    pub fn all_monotone(&self) -> bool {
        self.monotone_flags.iter().all(|&b| b)
    }

    pub fn iterations(&self) -> usize {
        self.monotone_flags.len() + 1
    }
}

/// Step grid shared by the fixed-step solvers: `(n_steps, dt, frame stride)`.
pub(crate) fn uniform_steps(cfg: &EvolveConfig) -> (usize, f64, usize) {
    let n = (cfg.t_final / cfg.dt_init - 1e-9).ceil().max(1.0) as usize;
    let dt = cfg.t_final / n as f64;
    let stride = cfg.frame_dt.map_or(1, |fd| ((fd / dt).round() as usize).max(1));
    (n, dt, stride)
}

pub fn picard_monotone(u0: &GridField, nl: &Nonlinearity, cfg: &EvolveConfig) -> Result<PicardState> {
    picard_monotone_source(u0, nl, cfg)
}

/// `u_n(t) = e^{tΔ}u₀ + ∫₀ᵗ e^{(t-s)Δ} f(u_{n-1}(s)) ds` on a uniform step
/// grid, starting from `u₁ = 0`.
pub fn picard_monotone_source(u0: &GridField, f: &dyn Source, cfg: &EvolveConfig) -> Result<PicardState> {
    cfg.validate(u0)?;
    check_nonnegative(u0)?;
    let g = &u0.geometry;
    let (n_steps, dt, stride) = uniform_steps(cfg);
    let mut props = Propagators::new(g, cfg.method);
    props.get(dt)?;
    let times: Vec<f64> = (0..=n_steps).map(|j| j as f64 * dt).collect();
    let out0 = outside_value(g);

    let mut prev: Vec<Vec<f64>> = vec![vec![0.0; g.len()]; n_steps + 1];
    let mut prev_out: Vec<Option<f64>> = vec![out0.map(|_| 0.0); n_steps + 1];
    let to_field = |traj: &[Vec<f64>], outs: &[Option<f64>]| -> Result<SpaceTimeField> {
        let idx: Vec<usize> = (0..=n_steps).filter(|j| j % stride == 0 || *j == n_steps).collect();
        let frames = idx.iter().map(|&j| frame(g, traj[j].clone(), outs[j])).collect();
        Ok(SpaceTimeField::new(idx.iter().map(|&j| times[j]).collect(), frames)?)
    };
    let mut iterates = Vec::new();
    if cfg.keep_iterates {
        iterates.push(to_field(&prev, &prev_out)?);
    }

    let mut flags = Vec::new();
    let mut mins = Vec::new();
    let mut gaps = Vec::new();
    let mut sup_gap = f64::INFINITY;
    let mut status = PicardStatus::Stalled;
    for n in 2..=cfg.max_picard {
        let src: Vec<Vec<f64>> = prev.par_iter().map(|u| u.iter().map(|&v| f.value(v)).collect()).collect();
        let src_out: Vec<Option<f64>> = prev_out.iter().map(|o| o.map(|v| f.value(v))).collect();
        let mut cur = Vec::with_capacity(n_steps + 1);
        let mut cur_out = Vec::with_capacity(n_steps + 1);
        cur.push(u0.values.clone());
        cur_out.push(out0);
        for j in 0..n_steps {
            let w_dt = match cfg.quadrature {
                DuhamelRule::Trapezoid => 0.5 * dt,
                DuhamelRule::LeftRectangle => dt,
            };
            let mut w: Vec<f64> = cur[j].iter().zip(&src[j]).map(|(u, s)| u + w_dt * s).collect();
            let mut o = cur_out[j].zip(src_out[j]).map(|(u, s)| u + w_dt * s);
            props.apply(dt, &mut w, o)?;
            if cfg.quadrature == DuhamelRule::Trapezoid {
                w.iter_mut().zip(&src[j + 1]).for_each(|(u, s)| *u += 0.5 * dt * s);
                o = o.zip(src_out[j + 1]).map(|(u, s)| u + 0.5 * dt * s);
            }
            let (i, top) = argmax(&w);
            let bad = |v: f64| !(v <= cfg.blowup_cap);
            if bad(top) || o.is_some_and(bad) {
                let position = if bad(top) { g.position(i)[..g.dim()].to_vec() } else { vec![f64::INFINITY; g.dim()] };
                let value = if bad(top) { top } else { o.unwrap_or(top) };
                return Err(EvolveError::BlowupDetected { position, t: times[j + 1], iterate: n, value });
            }
            cur.push(w);
            cur_out.push(o);
        }

        let sup = cur.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (a, b) in cur.iter().zip(&prev) {
            for (x, y) in a.iter().zip(b) {
                lo = lo.min(x - y);
                hi = hi.max((x - y).abs());
            }
        }
        for (a, b) in cur_out.iter().zip(&prev_out) {
            if let (Some(x), Some(y)) = (a, b) {
                lo = lo.min(x - y);
                hi = hi.max((x - y).abs());
            }
        }
        flags.push(lo >= -TOL_MONOTONE * (1.0 + sup));
        mins.push(lo);
        gaps.push(hi);
        sup_gap = cur[n_steps].iter().zip(&prev[n_steps]).fold(f64::NEG_INFINITY, |a, (x, y)| a.max(x - y));
        prev = cur;
        prev_out = cur_out;
        if cfg.keep_iterates {
            iterates.push(to_field(&prev, &prev_out)?);
        }
        if hi < TOL_CONVERGED * (1.0 + sup) {
            status = PicardStatus::Converged;
            break;
        }
    }
    if status != PicardStatus::Converged {
        let m = gaps.len();
        if m >= 2 && gaps[m - 1] < gaps[m - 2] {
            status = PicardStatus::SlowConvergence;
        }
    }
    let solution = to_field(&prev, &prev_out)?;
    if !cfg.keep_iterates {
        iterates.push(solution.clone());
    }
    Ok(PicardState { iterates, solution, monotone_flags: flags, min_increments: mins, gaps, sup_gap, status })
}
