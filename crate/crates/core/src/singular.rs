//! Singular initial data for the nonexistence statements:
//! `g⁻¹(α log(1/|x|))` profiles for `∂t u = Δu + e^{g(u)}`, and radial power
//! profiles pushed through `F⁻¹` for sources of power type.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::grid::uloc::{refine_trend, uloc_l1_of, Trend, UlocError};
use crate::grid::{Geometry, GridError, GridField};
use crate::nonlinearity::{Nonlinearity, NonlinearityError};
use crate::numerics::log_grid;
use crate::numerics::roots::{brent, expand_upward};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SingularError {
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("g is not convex/increasing beyond s0: {0}")]
    NotConvex(String),
    #[error("could not invert g at {y}")]
    InversionFailure { y: f64 },
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("F⁻¹ argument out of range at x = {position:?}")]
    Range { position: Vec<f64> },
    #[error(transparent)]
    Nonlinearity(#[from] NonlinearityError),
    #[error(transparent)]
    Uloc(#[from] UlocError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

type Result<T> = std::result::Result<T, SingularError>;
type ScalarMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Exponent map `g` of the source `e^{g(u)}`: convex and increasing beyond `s0`.
#[derive(Clone)]
pub struct ConvexGrowth {
    pub label: String,
    g: ScalarMap,
    g_prime: ScalarMap,
    g_inv: Option<ScalarMap>,
    pub s0: f64,
}

impl fmt::Debug for ConvexGrowth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvexGrowth").field("label", &self.label).field("s0", &self.s0).finish()
    }
}

impl ConvexGrowth {
    /// `g(s) = s`: the plain exponential source.
    pub fn identity(s0: f64) -> Result<Self> {
        Self::build("identity".into(), Arc::new(|s| s), Arc::new(|_| 1.0), Some(Arc::new(|y| y)), s0)
    }

    /// `g(s) = s²`: the source `e^{u²}`.
    pub fn square(s0: f64) -> Result<Self> {
        Self::build("square".into(), Arc::new(|s| s * s), Arc::new(|s| 2.0 * s), Some(Arc::new(|y: f64| y.max(0.0).sqrt())), s0)
    }

    /// A general `g`; inverted by bracketing on `[s0, ∞)`.
    pub fn new(
        label: impl Into<String>,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        g_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
        s0: f64,
    ) -> Result<Self> {
        Self::build(label.into(), Arc::new(g), Arc::new(g_prime), None, s0)
    }

    fn build(label: String, g: ScalarMap, g_prime: ScalarMap, g_inv: Option<ScalarMap>, s0: f64) -> Result<Self> {
        if !(s0 > 0.0 && s0.is_finite()) {
            return Err(SingularError::BadParameter(format!("s0 = {s0} must be positive")));
        }
        let cg = ConvexGrowth { label, g, g_prime, g_inv, s0 };
        cg.validate()?;
        Ok(cg)
    }

    /// Sampled `g′ > 0`, `g″ ≥ 0`, and `g″/(g′)²` decaying along a log grid.
    fn validate(&self) -> Result<()> {
        let grid = log_grid(self.s0, self.s0 * 1e6, 120);
        let mut ratios = Vec::with_capacity(grid.len());
        for &s in &grid {
            let gp = self.g_prime(s);
            if !(gp > 0.0) {
                return Err(SingularError::NotConvex(format!("g'({s}) = {gp}")));
            }
            let d = 1e-4 * s;
            let gpp = (self.g_prime(s + d) - self.g_prime(s - d)) / (2.0 * d);
            if gpp < -1e-8 * gp / s {
                return Err(SingularError::NotConvex(format!("g''({s}) = {gpp}")));
            }
            ratios.push(gpp / (gp * gp));
        }
        let (first, last) = (ratios[0], *ratios.last().unwrap());
        if last > 1e-3 && last >= first {
            return Err(SingularError::NotConvex(format!("g''/g'^2 does not decay ({first} -> {last})")));
        }
        Ok(())
    }

    pub fn g(&self, s: f64) -> f64 {
        (self.g)(s)
    }

    pub fn g_prime(&self, s: f64) -> f64 {
        (self.g_prime)(s)
    }

    pub fn g_inv(&self, y: f64) -> Result<f64> {
        if let Some(inv) = &self.g_inv {
            return Ok(inv(y));
        }
        let h = |s: f64| self.g(s) - y;
        let h0 = h(self.s0);
        if h0 == 0.0 {
            return Ok(self.s0);
        }
        if h0 > 0.0 {
            return Err(SingularError::InversionFailure { y });
        }
        let (lo, hi) = expand_upward(&h, self.s0, |s| 2.0 * s + 1.0, 200).map_err(|_| SingularError::InversionFailure { y })?;
        brent(h, lo, hi, 1e-14 * hi.abs().max(1.0)).map_err(|_| SingularError::InversionFailure { y })
    }

    /// Largest `C` with `g(s) ≥ Cs` on a sampled range beyond `s0`.
    pub fn growth_constant(&self) -> f64 {
        log_grid(self.s0, self.s0 * 1e6, 200).into_iter().map(|s| self.g(s) / s).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Provenance {
    pub family: String,
    pub dim: usize,
    pub spacing: f64,
    pub alpha: Option<f64>,
    pub kappa: Option<f64>,
    pub r: Option<f64>,
    /// Radius inside which the singular profile is used.
    pub r0: f64,
    /// Floor value (`s0` or the threshold `s₂`).
    pub floor: f64,
    /// Value at the node(s) within half a cell of the origin.
    pub origin_cap: f64,
    pub growth: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SingularData {
    pub field: GridField,
    pub provenance: Provenance,
}

fn radius(g: &Geometry, i: usize) -> f64 {
    g.position(i)[..g.dim()].iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// `u₀ = g⁻¹(α log(1/|x|))` for `|x| < r₀`, `s0` beyond, with
/// `g⁻¹(α log(1/r₀)) = s0`; nodes within half a cell of the origin take the
/// value at `|x| = h/2`.
pub fn exp_singular(g: &ConvexGrowth, alpha: f64, geometry: &Geometry) -> Result<SingularData> {
    if !(alpha > 2.0 && alpha.is_finite()) {
        return Err(SingularError::BadParameter(format!("alpha = {alpha} must exceed 2")));
    }
    geometry.validate()?;
    let s0 = g.s0;
    let r0 = (-g.g(s0) / alpha).exp();
    let h = geometry.spacing;
    let cap = g.g_inv(alpha * (2.0 / h).ln())?;
    let out = geometry.with_extension(s0);
    let mut values = Vec::with_capacity(out.len());
    for i in 0..out.len() {
        let r = radius(&out, i);
        let v = if r < r0 {
            let rr = r.max(0.5 * h);
            g.g_inv(alpha * (1.0 / rr).ln())?.max(s0)
        } else {
            s0
        };
        values.push(v);
    }
    let provenance = Provenance {
        family: "exp_singular".into(),
        dim: out.dim(),
        spacing: h,
        alpha: Some(alpha),
        kappa: None,
        r: None,
        r0,
        floor: s0,
        origin_cap: cap,
        growth: Some(g.label.clone()),
    };
    Ok(SingularData { field: GridField::new(out, values)?, provenance })
}

/// Radius of the truncated power profile.
pub const POWER_PROFILE_RADIUS: f64 = 0.5;

/// Default log sharpening `κ = 2(A-1)/r`, which makes `F(u₀)^{-r}` behave
/// like `|x|^{-N}(log 1/|x|)^{-2}` (integrable).
pub fn default_kappa(a: f64, r: f64) -> f64 {
    2.0 * (a - 1.0) / r
}

/// `u₀ = max{F⁻¹(v₀^{-1/(A-1)}), s₂}` with
/// `v₀ = |x|^{-N(A-1)/r} (log 1/|x|)^{-κ}` inside radius 1/2 and 0 beyond.
pub fn power_singular(nl: &Nonlinearity, r: f64, n: usize, geometry: &Geometry, kappa: Option<f64>) -> Result<SingularData> {
    if nl.is_exponential_type() || !(nl.a_value() > 1.0) {
        return Err(SingularError::NotApplicable(format!("needs A > 1, got {}", nl.a_value())));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(SingularError::BadParameter(format!("r = {r}")));
    }
    if n != geometry.dim() {
        return Err(SingularError::BadParameter(format!("N = {n} but grid dimension {}", geometry.dim())));
    }
    geometry.validate()?;
    let a = nl.a_value();
    let kappa = kappa.unwrap_or_else(|| default_kappa(a, r));
    let beta = n as f64 * (a - 1.0) / r;
    let s2 = nl.s_threshold().max(nl.domain_floor());
    let h = geometry.spacing;
    let profile = |rr: f64| -> Result<f64> {
        let rr = rr.max(0.5 * h);
        let ln_v = -beta * rr.ln() - kappa * (1.0 / rr).ln().ln();
        let ln_y = -ln_v / (a - 1.0);
        if ln_y >= nl.ln_structure_sup() {
            return Ok(s2);
        }
        Ok(nl.structure_inv_ln(ln_y)?.max(s2))
    };
    let out = geometry.with_extension(s2);
    let mut values = Vec::with_capacity(out.len());
    for i in 0..out.len() {
        let rr = radius(&out, i);
        let v = if rr < POWER_PROFILE_RADIUS {
            profile(rr).map_err(|e| match e {
                SingularError::Nonlinearity(NonlinearityError::OutOfRange { .. }) => {
                    SingularError::Range { position: out.position(i)[..n].to_vec() }
                }
                other => other,
            })?
        } else {
            s2
        };
        values.push(v);
    }
    let provenance = Provenance {
        family: "power_singular".into(),
        dim: n,
        spacing: h,
        alpha: None,
        kappa: Some(kappa),
        r: Some(r),
        r0: POWER_PROFILE_RADIUS,
        floor: s2,
        origin_cap: profile(0.0)?,
        growth: Some(nl.name()),
    };
    Ok(SingularData { field: GridField::new(out, values)?, provenance })
}

/// `(h, ‖φ(u₀)‖_{1,ul,ρ})` over `levels` successive halvings of `base`, and
/// the resulting trend.
pub fn refinement_trend(
    base: &Geometry,
    levels: usize,
    rho: f64,
    build: impl Fn(&Geometry) -> Result<GridField>,
    phi: impl Fn(f64) -> f64 + Sync,
) -> Result<(Vec<(f64, f64)>, Trend)> {
    let mut g = base.clone();
    let mut pts = Vec::with_capacity(levels);
    for level in 0..levels {
        if level > 0 {
            g = g.refined();
        }
        let u = build(&g)?;
        pts.push((g.spacing, uloc_l1_of(&u, rho, &phi)?));
    }
    let trend = refine_trend(&pts)?;
    Ok((pts, trend))
}
