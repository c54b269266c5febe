//! Solvers: monotone Picard iteration, an exponential IMEX stepper with
//! blow-up detection, transform-built supersolutions, the Weissler
//! nonexistence certificate and a discrete contraction probe.
//!
//! Blow-up reports and certificates are numerical evidence at the chosen
//! `h` and `dt`, not proofs.

mod contraction;
mod imex;
mod picard;
mod supersolution;
mod weissler;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use contraction::{contraction_probe, ContractionConfig, ContractionReport, CriticalDecay, Regime};
pub use imex::{imex_evolve, imex_evolve_source, BlowupReport, ImexOutcome};
pub use picard::{picard_monotone, picard_monotone_source, PicardState, PicardStatus};
pub use supersolution::{build_supersolution, SupersolutionReport, TOL_RESIDUAL};
pub use weissler::{weissler_a, weissler_a_closed, weissler_certificate, weissler_ck, Certificate, CkSum};

use crate::grid::uloc::UlocError;
use crate::grid::{Boundary, Geometry, GridError, GridField};
use crate::heat::{HeatError, HeatPropagator, SemigroupMethod, SemigroupPlan};
use crate::nonlinearity::NonlinearityError;
use crate::singular::SingularError;
use crate::transforms::TransformError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolveError {
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("initial data negative at index {index} ({value})")]
    NegativeData { index: usize, value: f64 },
    #[error("iterate {iterate} exceeded the cap at x = {position:?}, t = {t} (value {value})")]
    BlowupDetected { position: Vec<f64>, t: f64, iterate: usize, value: f64 },
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("auxiliary equation blew up at t ≈ {time}")]
    AuxiliaryBlowup { time: f64 },
    #[error("critical exponent r = {r} = N(p-1)/2 needs r > 1")]
    CriticalExponent { r: f64 },
    #[error("supercritical: r = {r} < N(p-1)/2 = {critical}")]
    Supercritical { r: f64, critical: f64 },
    #[error(transparent)]
    Heat(#[from] HeatError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Nonlinearity(#[from] NonlinearityError),
    #[error(transparent)]
    Uloc(#[from] UlocError),
    #[error(transparent)]
    Singular(#[from] SingularError),
}

pub type Result<T> = std::result::Result<T, EvolveError>;

/// Rule for the Duhamel integral over one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DuhamelRule {
    LeftRectangle,
    #[default]
    Trapezoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawEvolveConfig")]
pub struct EvolveConfig {
    pub t_final: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub blowup_cap: f64,
    pub quadrature: DuhamelRule,
    pub max_picard: usize,
    /// Output spacing in time; every step when absent.
    pub frame_dt: Option<f64>,
    /// Semigroup used per step; the positive-kernel default when absent.
    pub method: Option<SemigroupMethod>,
    pub keep_iterates: bool,
}

/// Config as written in scenario files; omitted fields take the `new` defaults.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvolveConfig {
    #[serde(alias = "T")]
    t_final: f64,
    dt_init: f64,
    #[serde(default)]
    dt_min: Option<f64>,
    #[serde(default)]
    blowup_cap: Option<f64>,
    #[serde(default)]
    quadrature: DuhamelRule,
    #[serde(default = "default_max_picard")]
    max_picard: usize,
    #[serde(default)]
    frame_dt: Option<f64>,
    #[serde(default)]
    method: Option<SemigroupMethod>,
    #[serde(default)]
    keep_iterates: bool,
}

impl From<RawEvolveConfig> for EvolveConfig {
    fn from(r: RawEvolveConfig) -> Self {
        let base = EvolveConfig::new(r.t_final, r.dt_init);
        EvolveConfig {
            dt_min: r.dt_min.unwrap_or(base.dt_min),
            blowup_cap: r.blowup_cap.unwrap_or(base.blowup_cap),
            quadrature: r.quadrature,
            max_picard: r.max_picard,
            frame_dt: r.frame_dt,
            method: r.method,
            keep_iterates: r.keep_iterates,
            ..base
        }
    }
}

fn default_max_picard() -> usize {
    64
}

impl EvolveConfig {
    pub fn new(t_final: f64, dt: f64) -> Self {
        EvolveConfig {
            t_final,
            dt_init: dt,
            dt_min: dt * 1e-6,
            blowup_cap: 1e8,
            quadrature: DuhamelRule::Trapezoid,
            max_picard: default_max_picard(),
            frame_dt: None,
            method: None,
            keep_iterates: false,
        }
    }

    pub fn with_frame_dt(mut self, frame_dt: f64) -> Self {
        self.frame_dt = Some(frame_dt);
        self
    }

    pub fn with_cap(mut self, cap: f64) -> Self {
        self.blowup_cap = cap;
        self
    }

    pub fn validate(&self, u0: &GridField) -> Result<()> {
        let bad = |m: String| Err(EvolveError::BadConfig(m));
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return bad(format!("T = {} must be positive", self.t_final));
        }
        if !(self.dt_init > 0.0 && self.dt_min > 0.0 && self.dt_min < self.dt_init) {
            return bad(format!("need 0 < dt_min < dt_init (got {} and {})", self.dt_min, self.dt_init));
        }
        if let Some(fd) = self.frame_dt {
            if !(fd > 0.0) {
                return bad(format!("frame_dt = {fd}"));
            }
        }
        if self.max_picard < 2 {
            return bad("max_picard must be at least 2".into());
        }
        let top = u0.max().max(outside_value(&u0.geometry).unwrap_or(f64::NEG_INFINITY));
        if !(self.blowup_cap > top) {
            return bad(format!("blowup_cap {} must exceed max initial value {top}", self.blowup_cap));
        }
        Ok(())
    }
}

fn check_nonnegative(u0: &GridField) -> Result<()> {
    if let Some((index, &value)) = u0.values.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(EvolveError::NegativeData { index, value });
    }
    if let Some(value) = outside_value(&u0.geometry) {
        if value < 0.0 {
            return Err(EvolveError::NegativeData { index: usize::MAX, value });
        }
    }
    Ok(())
}

pub(crate) fn outside_value(g: &Geometry) -> Option<f64> {
    match g.boundary {
        Boundary::Periodic => None,
        Boundary::ConstantExtension { value } => Some(value),
    }
}

/// `e^{dtΔ}` per step size, built lazily.
pub(crate) struct Propagators {
    geometry: Geometry,
    method: Option<SemigroupMethod>,
    cache: HashMap<u64, HeatPropagator>,
}

impl Propagators {
    pub(crate) fn new(geometry: &Geometry, method: Option<SemigroupMethod>) -> Self {
        Propagators { geometry: geometry.clone(), method, cache: HashMap::new() }
    }

    pub(crate) fn get(&mut self, dt: f64) -> Result<&HeatPropagator> {
        let key = dt.to_bits();
        if !self.cache.contains_key(&key) {
            let method = self.method.unwrap_or_else(|| SemigroupMethod::positive_for(&self.geometry, dt));
            let prop = HeatPropagator::new(&self.geometry, SemigroupPlan::new(method, dt)?)?;
            self.cache.insert(key, prop);
        }
        Ok(&self.cache[&key])
    }

    /// `e^{dtΔ}` applied in place; `outside` is the constant beyond an
    /// extended box (the heat flow leaves it unchanged).
    pub(crate) fn apply(&mut self, dt: f64, values: &mut [f64], outside: Option<f64>) -> Result<()> {
        self.get(dt)?.apply_values_with_outside(values, outside)?;
        Ok(())
    }
}

pub(crate) fn frame(geometry: &Geometry, values: Vec<f64>, outside: Option<f64>) -> GridField {
    let geometry = match outside {
        Some(v) => geometry.with_extension(v),
        None => geometry.clone(),
    };
    GridField { geometry, values }
}

/// Index and value of the largest entry.
pub(crate) fn argmax(values: &[f64]) -> (usize, f64) {
    values.iter().copied().enumerate().fold((0, f64::NEG_INFINITY), |a, (i, v)| if v > a.1 { (i, v) } else { a })
}
