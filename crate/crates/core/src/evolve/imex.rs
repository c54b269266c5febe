use serde::Serialize;

use super::{argmax, check_nonnegative, frame, outside_value, EvolveConfig, Propagators, Result};
use crate::grid::GridField;
use crate::nonlinearity::{Nonlinearity, Source};
use crate::numerics::linear_fit;
use crate::transforms::SpaceTimeField;

/// A step is redone with half the size above this relative increment.
const REJECT_INCREMENT: f64 = 0.1;
/// ... and the size doubles again below this one.
const GROW_INCREMENT: f64 = 0.025;

#[derive(Debug, Clone, Serialize)]
pub struct BlowupReport {
    /// Last accepted time plus the ODE lifetime left at the peak value.
    pub time_estimate: f64,
    pub last_time: f64,
    pub location: Vec<f64>,
    pub max_value: f64,
    /// Fitted `γ` in `max u ∝ (T* - t)^{-γ}` over the late history.
    pub growth_exponent: Option<f64>,
    /// `"cap"` or `"dt_min"`.
    pub trigger: String,
    #[serde(skip)]
    pub frames: Option<SpaceTimeField>,
}

#[derive(Debug, Clone)]
pub enum ImexOutcome {
    Completed(SpaceTimeField),
    Blowup(BlowupReport),
}

impl ImexOutcome {
    pub fn completed(self) -> Option<SpaceTimeField> {
        match self {
            ImexOutcome::Completed(s) => Some(s),
            ImexOutcome::Blowup(_) => None,
        }
    }
}

pub fn imex_evolve(u0: &GridField, nl: &Nonlinearity, cfg: &EvolveConfig) -> Result<ImexOutcome> {
    imex_evolve_source(u0, nl, cfg)
}

/// Exponential second-order stepping: exact heat flow over each step, source
/// by a Heun-type correction. Frames land on multiples of `frame_dt`.
pub fn imex_evolve_source(u0: &GridField, f: &dyn Source, cfg: &EvolveConfig) -> Result<ImexOutcome> {
    cfg.validate(u0)?;
    check_nonnegative(u0)?;
    let g = &u0.geometry;
    let mut props = Propagators::new(g, cfg.method);
    let frame_dt = cfg.frame_dt.unwrap_or(cfg.dt_init);

    let mut u = u0.values.clone();
    let mut out = outside_value(g);
    let mut t = 0.0;
    let mut dt = cfg.dt_init;
    let mut times = vec![0.0];
    let mut frames = vec![frame(g, u.clone(), out)];
    let mut next_frame = 1usize;
    let mut history: Vec<(f64, f64)> = vec![(0.0, argmax(&u).1)];

    let blowup = |t: f64, u: &[f64], out: Option<f64>, trigger: &str, history: &[(f64, f64)], times: Vec<f64>, frames: Vec<GridField>| {
        let (i, mut top) = argmax(u);
        let mut location = g.position(i)[..g.dim()].to_vec();
        if let Some(o) = out.filter(|&o| o > top) {
            top = o;
            location = vec![f64::INFINITY; g.dim()];
        }
        let time_estimate = t + f.remaining_time(top).unwrap_or(0.0);
        let growth_exponent = growth_fit(history, time_estimate);
        let frames = SpaceTimeField::new(times, frames).ok();
        BlowupReport { time_estimate, last_time: t, location, max_value: top, growth_exponent, trigger: trigger.into(), frames }
    };

    while t < cfg.t_final * (1.0 - 1e-14) {
        let target = (next_frame as f64 * frame_dt).min(cfg.t_final);
        let step = dt.min(target - t);
        let fu: Vec<f64> = u.iter().map(|&v| f.value(v)).collect();
        let fo = out.map(|v| f.value(v));
        let incr = u.iter().zip(&fu).fold(0.0f64, |a, (v, s)| a.max(step * s.abs() / (1.0 + v.abs())));
        let incr = fo.zip(out).map_or(incr, |(s, v)| incr.max(step * s.abs() / (1.0 + v.abs())));
        if incr > REJECT_INCREMENT {
            dt = 0.5 * step;
            if dt < cfg.dt_min {
                return Ok(ImexOutcome::Blowup(blowup(t, &u, out, "dt_min", &history, times, frames)));
            }
            continue;
        }
        let mut pu = u.clone();
        props.apply(step, &mut pu, out)?;
        let mut pf = fu;
        props.apply(step, &mut pf, fo)?;
        let pred: Vec<f64> = pu.iter().zip(&pf).map(|(a, b)| a + step * b).collect();
        for i in 0..u.len() {
            u[i] = pu[i] + 0.5 * step * (pf[i] + f.value(pred[i]));
        }
        out = out.zip(fo).map(|(o, s)| {
            let p = o + step * s;
            o + 0.5 * step * (s + f.value(p))
        });
        t += step;
        let (_, top) = argmax(&u);
        let top = out.map_or(top, |o| top.max(o));
        history.push((t, top));
        if !(top <= cfg.blowup_cap) {
            return Ok(ImexOutcome::Blowup(blowup(t, &u, out, "cap", &history, times, frames)));
        }
        if (t - target).abs() <= 1e-12 * target.max(1.0) {
            t = target;
            times.push(t);
            frames.push(frame(g, u.clone(), out));
            next_frame += 1;
        }
        if incr < GROW_INCREMENT && step == dt {
            dt = (2.0 * dt).min(cfg.dt_init);
        }
    }
    Ok(ImexOutcome::Completed(SpaceTimeField::new(times, frames)?))
}

/// Slope of `ln max u` against `ln(1/(T* - t))` over the last half of the
/// history with `T* - t > 0`.
fn growth_fit(history: &[(f64, f64)], t_star: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        history.iter().filter(|(t, m)| t_star - t > 0.0 && *m > 0.0).map(|(t, m)| (-(t_star - t).ln(), m.ln())).collect();
    let tail = &pts[pts.len() / 2..];
    if tail.len() < 4 {
        return None;
    }
    let (x, y): (Vec<f64>, Vec<f64>) = tail.iter().copied().unzip();
    Some(linear_fit(&x, &y).0)
}
