//! Source terms `f` and their structure function `F(s) = ∫ₛ^∞ du/f(u)`.
//!
//! Everything is carried in log space: `ln F` stays representable long after
//! `F` itself underflows (`F(s) = e^{-s}` at `s = 1000`, or the Gaussian tail
//! for `e^{u²}`). `structure` exponentiates at the very end.

pub mod bounds;
pub mod custom;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::quad::{integrate, QuadError};
use crate::numerics::roots::RootError;
use crate::numerics::softplus;
use crate::numerics::special::erfcx;

const SQRT_PI: f64 = 1.772_453_850_905_516;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NonlinearityError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("tail integral of 1/f diverges beyond s = {s} (f is not superlinear)")]
    TailDivergence { s: f64 },
    #[error("source is not positive: f({u}) = {value}")]
    NonPositiveSource { u: f64, value: f64 },
    #[error("y = {y:e} is outside the range (0, {sup:e}) of F")]
    OutOfRange { y: f64, sup: f64 },
    #[error("s = {s} lies below the domain floor {floor}")]
    OutOfDomain { s: f64, floor: f64 },
    #[error("bracket expansion failed while inverting F")]
    NoBracket,
    #[error("numerical procedure did not converge: {0}")]
    NonConvergent(String),
    #[error("cannot parse nonlinearity '{0}' (expected power(p), powersum(p,q), exp, expsq)")]
    Parse(String),
}

impl From<QuadError> for NonlinearityError {
    fn from(e: QuadError) -> Self {
        NonlinearityError::NonConvergent(e.to_string())
    }
}

impl From<RootError> for NonlinearityError {
    fn from(e: RootError) -> Self {
        match e {
            RootError::NoBracket { .. } => NonlinearityError::NoBracket,
            other => NonlinearityError::NonConvergent(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, NonlinearityError>;

/// Which side of `A` the product `f′F` sits on beyond the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Below,
    Above,
    /// `f′F ≡ A`: both one-sided conditions hold.
    Constant,
    Mixed,
    Unknown,
}

impl Side {
    /// `f′F ≤ A` eventually.
    pub fn is_below(self) -> bool {
        matches!(self, Side::Below | Side::Constant)
    }

    /// `f′F ≥ A` eventually.
    pub fn is_above(self) -> bool {
        matches!(self, Side::Above | Side::Constant)
    }
}

type ScalarMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied source with explicit derivative.
#[derive(Clone)]
pub struct CustomSource {
    pub label: String,
    pub f: ScalarMap,
    pub f_prime: ScalarMap,
    pub domain_floor: f64,
}

impl fmt::Debug for CustomSource {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("CustomSource").field("label", &self.label).field("domain_floor", &self.domain_floor).finish()
    }
}

#[derive(Debug, Clone)]
pub enum Kind {
    Power { p: f64 },
    PowerSum { p: f64, q: f64 },
    Exponential,
    ExpSquare,
    Custom(CustomSource),
}

impl Kind {
    /// Config name, e.g. `power(2)`.
    pub fn name(&self) -> String {
        match self {
            Kind::Power { p } => format!("power({p})"),
            Kind::PowerSum { p, q } => format!("powersum({p},{q})"),
            Kind::Exponential => "exp".into(),
            Kind::ExpSquare => "expsq".into(),
            Kind::Custom(c) => format!("custom({})", c.label),
        }
    }
}

impl FromStr for Kind {
    type Err = NonlinearityError;

    fn from_str(s: &str) -> Result<Kind> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_lowercase();
        let args = |prefix: &str| -> Option<Vec<f64>> {
            let inner = t.strip_prefix(prefix)?.strip_prefix('(')?.strip_suffix(')')?;
            inner.split(',').map(|v| v.parse::<f64>().ok()).collect()
        };
        match t.as_str() {
            "exp" | "exponential" => return Ok(Kind::Exponential),
            "expsq" | "expsquare" => return Ok(Kind::ExpSquare),
            _ => {}
        }
        if let Some(a) = args("powersum") {
            if let [p, q] = a[..] {
                return Ok(Kind::PowerSum { p, q });
            }
        } else if let Some(a) = args("power") {
            if let [p] = a[..] {
                return Ok(Kind::Power { p });
            }
        }
        Err(NonlinearityError::Parse(s.to_string()))
    }
}

/// Outcome of the numeric limit `A = lim f′(s)F(s)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AEstimate {
    /// NaN when the tail is too slow to extrapolate and a closed form stands in.
    pub a_hat: f64,
    pub side: Side,
    pub s_threshold: f64,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

/// One row of diagnostics at a sample point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub s: f64,
    pub f_val: f64,
    pub fprime_val: f64,
    #[serde(rename = "F_val")]
    pub big_f: f64,
    #[serde(rename = "Finv_of_F")]
    pub finv_of_f: f64,
    #[serde(rename = "fprimeF")]
    pub fprime_f: f64,
}

/// A source term with its resolved constant `A` and monotone side.
#[derive(Debug, Clone)]
pub struct Nonlinearity {
    kind: Kind,
    a_value: f64,
    side: Side,
    s_threshold: f64,
    side_heuristic: bool,
    estimate: AEstimate,
}

/// Tolerance for the floor `A ≥ 1` and for closed-form cross-checks.
pub const TOL_A: f64 = 1e-6;
/// Consecutive doublings a side must persist for.
pub const SIDE_STABLE_DOUBLINGS: usize = 8;

impl Nonlinearity {
    pub fn power(p: f64) -> Result<Self> {
        Self::new(Kind::Power { p })
    }

    pub fn power_sum(p: f64, q: f64) -> Result<Self> {
        Self::new(Kind::PowerSum { p, q })
    }

    pub fn exponential() -> Self {
        Self::new(Kind::Exponential).expect("exponential source is always valid")
    }

    pub fn exp_square() -> Self {
        Self::new(Kind::ExpSquare).expect("e^{u^2} source is always valid")
    }

    pub fn custom(
        label: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        f_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
        domain_floor: f64,
    ) -> Result<Self> {
        Self::new(Kind::Custom(CustomSource { label: label.into(), f: Arc::new(f), f_prime: Arc::new(f_prime), domain_floor }))
    }

    /// Validates parameters and resolves `A`, side and threshold.
    pub fn new(kind: Kind) -> Result<Self> {
        match &kind {
            Kind::Power { p } if !(*p > 1.0 && p.is_finite()) => {
                return Err(NonlinearityError::InvalidParameter(format!("power exponent p = {p} must exceed 1")));
            }
            Kind::PowerSum { p, q } if !(p > q && *q > 1.0 && p.is_finite()) => {
                return Err(NonlinearityError::InvalidParameter(format!("powersum needs p > q > 1, got p = {p}, q = {q}")));
            }
            Kind::Custom(c) if !(c.domain_floor >= 0.0 && c.domain_floor.is_finite()) => {
                return Err(NonlinearityError::InvalidParameter("custom domain floor must be finite and >= 0".into()));
            }
            _ => {}
        }
        let mut nl = Nonlinearity {
            kind,
            a_value: f64::NAN,
            side: Side::Unknown,
            s_threshold: f64::NAN,
            side_heuristic: false,
            estimate: AEstimate { a_hat: f64::NAN, side: Side::Unknown, s_threshold: f64::NAN, grid: vec![], values: vec![] },
        };
        let grid = nl.default_grid();
        if let Kind::Custom(_) = nl.kind {
            nl.check_positive(&grid)?;
        }
        let exact = match nl.kind {
            Kind::Power { p } => Some((p / (p - 1.0), Side::Constant)),
            // f′F - A ~ c·s^{q-p} with c ∝ (p-q)(1-(p-q)); at p - q = 1 the
            // next term is positive
            Kind::PowerSum { p, q } => Some((p / (p - 1.0), if p - q > 1.0 { Side::Below } else { Side::Above })),
            Kind::Exponential => Some((1.0, Side::Constant)),
            Kind::ExpSquare => Some((1.0, Side::Below)),
            Kind::Custom(_) => None,
        };
        let est = match (nl.estimate_a(&grid), exact) {
            // a slowly settling tail only loses the cross-check
            (Err(NonlinearityError::NonConvergent(_)), Some((a, _))) => nl.unextrapolated(&grid, a)?,
            (r, _) => r?,
        };
        match exact {
            Some((a, side)) => {
                // extrapolation is trusted to a few percent of its own correction
                let correction = est.values.last().map_or(0.0, |v| (est.a_hat - v).abs());
                if est.a_hat.is_finite() && (est.a_hat - a).abs() > TOL_A.max(0.05 * correction) {
                    return Err(NonlinearityError::NonConvergent(format!("numeric A = {} disagrees with closed form {a}", est.a_hat)));
                }
                nl.a_value = a;
                nl.side = side;
                nl.s_threshold = if est.side == side || side == Side::Constant { est.s_threshold } else { *grid.last().unwrap() };
            }
            None => {
                nl.a_value = est.a_hat;
                nl.side = est.side;
                nl.s_threshold = est.s_threshold;
                nl.side_heuristic = true;
            }
        }
        nl.estimate = est;
        Ok(nl)
    }

    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    pub fn name(&self) -> String {
        self.kind.name()
    }

    pub fn a_value(&self) -> f64 {
        self.a_value
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn s_threshold(&self) -> f64 {
        self.s_threshold
    }

    /// True when the side came from sampling rather than a closed form.
    pub fn side_is_heuristic(&self) -> bool {
        self.side_heuristic
    }

    pub fn a_estimate(&self) -> &AEstimate {
        &self.estimate
    }

    /// `A` is treated as exactly one below this distance.
    pub fn is_exponential_type(&self) -> bool {
        (self.a_value - 1.0).abs() < 1e-9
    }

    /// Smallest admissible argument of `f`.
    pub fn domain_floor(&self) -> f64 {
        match &self.kind {
            Kind::Exponential => f64::NEG_INFINITY,
            Kind::Custom(c) => c.domain_floor,
            _ => 0.0,
        }
    }

    pub fn f(&self, s: f64) -> f64 {
        match &self.kind {
            Kind::Power { p } => s.powf(*p),
            Kind::PowerSum { p, q } => s.powf(*p) + s.powf(*q),
            Kind::Exponential => s.exp(),
            Kind::ExpSquare => (s * s).exp(),
            Kind::Custom(c) => (c.f)(s),
        }
    }

    pub fn fprime(&self, s: f64) -> f64 {
        match &self.kind {
            Kind::Power { p } => p * s.powf(p - 1.0),
            Kind::PowerSum { p, q } => p * s.powf(p - 1.0) + q * s.powf(q - 1.0),
            Kind::Exponential => s.exp(),
            Kind::ExpSquare => 2.0 * s * (s * s).exp(),
            Kind::Custom(c) => (c.f_prime)(s),
        }
    }

    pub fn ln_f(&self, s: f64) -> f64 {
        match &self.kind {
            Kind::Power { p } => p * s.ln(),
            Kind::PowerSum { p, q } => q * s.ln() + softplus((p - q) * s.ln()),
            Kind::Exponential => s,
            Kind::ExpSquare => s * s,
            Kind::Custom(c) => (c.f)(s).ln(),
        }
    }

    fn check_domain(&self, s: f64) -> Result<()> {
        if s.is_nan() || s < self.domain_floor() {
            return Err(NonlinearityError::OutOfDomain { s, floor: self.domain_floor() });
        }
        Ok(())
    }

    /// `ln F(s)`; `+∞` where `F` itself is infinite (e.g. `s = 0` for powers).
    pub fn ln_structure(&self, s: f64) -> Result<f64> {
        self.check_domain(s)?;
        match &self.kind {
            Kind::Power { p } => Ok((1.0 - p) * s.ln() - (p - 1.0).ln()),
            Kind::Exponential => Ok(-s),
            Kind::ExpSquare => Ok((0.5 * SQRT_PI * erfcx(s)).ln() - s * s),
            Kind::PowerSum { p, q } => {
                if s == 0.0 {
                    return Ok(f64::INFINITY);
                }
                power_sum_ln_structure(*p, *q, s)
            }
            Kind::Custom(c) => custom_ln_structure(c, s),
        }
    }

    /// `F(s) = ∫ₛ^∞ du/f(u)`; may underflow to zero where `ln_structure` does not.
    pub fn structure(&self, s: f64) -> Result<f64> {
        Ok(self.ln_structure(s)?.exp())
    }

    /// `ln F` at the domain floor (`+∞` when `F` blows up there).
    pub fn ln_structure_sup(&self) -> f64 {
        match &self.kind {
            Kind::Power { .. } | Kind::PowerSum { .. } | Kind::Exponential => f64::INFINITY,
            Kind::ExpSquare => (0.5 * SQRT_PI).ln(),
            Kind::Custom(c) => {
                let v = (c.f)(c.domain_floor);
                if v > 0.0 && v.is_finite() {
                    custom_ln_structure(c, c.domain_floor).unwrap_or(f64::INFINITY)
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `f′(s)F(s)`, evaluated without forming the (possibly huge) factors.
    pub fn fprime_structure(&self, s: f64) -> Result<f64> {
        self.check_domain(s)?;
        match &self.kind {
            Kind::Power { p } => Ok(p / (p - 1.0)),
            Kind::Exponential => Ok(1.0),
            Kind::ExpSquare => Ok(SQRT_PI * s * erfcx(s)),
            Kind::PowerSum { p, q } => {
                let ln_fp = q.ln() + (q - 1.0) * s.ln() + softplus((p / q).ln() + (p - q) * s.ln());
                Ok((ln_fp + self.ln_structure(s)?).exp())
            }
            Kind::Custom(c) => {
                let fp = (c.f_prime)(s);
                Ok((fp.ln() + self.ln_structure(s)?).exp())
            }
        }
    }

    /// `F⁻¹(y)`.
    pub fn structure_inv(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            return Err(NonlinearityError::OutOfRange { y, sup: self.ln_structure_sup().exp() });
        }
        self.structure_inv_ln(y.ln())
    }

    /// `F⁻¹(e^{ln_y})`, the form every transform uses.
    pub fn structure_inv_ln(&self, ln_y: f64) -> Result<f64> {
        let sup = self.ln_structure_sup();
        if ln_y.is_nan() || ln_y >= sup {
            return Err(NonlinearityError::OutOfRange { y: ln_y.exp(), sup: sup.exp() });
        }
        if ln_y == f64::NEG_INFINITY {
            return Ok(f64::INFINITY);
        }
        match &self.kind {
            Kind::Power { p } => Ok((-((p - 1.0).ln() + ln_y) / (p - 1.0)).exp()),
            Kind::Exponential => Ok(-ln_y),
            Kind::ExpSquare => self.invert_numeric(ln_y, (-ln_y).max(1e-6).sqrt()),
            Kind::PowerSum { p, .. } => {
                let guess = (-((p - 1.0).ln() + ln_y) / (p - 1.0)).exp();
                self.invert_numeric(ln_y, guess)
            }
            Kind::Custom(c) => self.invert_numeric(ln_y, c.domain_floor.max(1e-3) * 2.0),
        }
    }

    /// Safeguarded Newton in `z = ln s` on `ln F(e^z) = ln_y`; `ln F` is
    /// strictly decreasing with derivative `-s/(f F)`.
    fn invert_numeric(&self, ln_y: f64, guess: f64) -> Result<f64> {
        let floor = self.domain_floor();
        let g = |z: f64| -> Result<(f64, f64)> {
            let s = z.exp();
            let l = self.ln_structure(s)?;
            let d = -(z - self.ln_f(s) - l).exp();
            Ok((l - ln_y, d))
        };
        let z_floor = if floor > 0.0 { floor.ln() } else { -745.0 };
        let mut z = guess.max(f64::MIN_POSITIVE).ln().max(z_floor + 1e-12);
        // bracket: value(lo) > 0 > value(hi)
        let (mut lo, mut hi) = (f64::NAN, f64::NAN);
        let (v0, _) = g(z)?;
        if v0 == 0.0 {
            return Ok(z.exp());
        }
        let mut step = 1.0;
        if v0 > 0.0 {
            lo = z;
            for _ in 0..80 {
                let cand = z + step;
                if cand > 709.0 {
                    return Err(NonlinearityError::NoBracket);
                }
                if g(cand)?.0 <= 0.0 {
                    hi = cand;
                    break;
                }
                lo = cand;
                z = cand;
                step *= 2.0;
            }
        } else {
            hi = z;
            for _ in 0..80 {
                let cand = (z - step).max(z_floor);
                let v = if cand <= z_floor && floor > 0.0 { self.ln_structure(floor)? - ln_y } else { g(cand)?.0 };
                if v >= 0.0 {
                    lo = cand;
                    break;
                }
                if cand <= z_floor {
                    return Err(NonlinearityError::NoBracket);
                }
                hi = cand;
                z = cand;
                step *= 2.0;
            }
        }
        if lo.is_nan() || hi.is_nan() {
            return Err(NonlinearityError::NoBracket);
        }
        let mut z = 0.5 * (lo + hi);
        for _ in 0..200 {
            let (v, d) = g(z)?;
            if v == 0.0 {
                return Ok(z.exp());
            }
            if v > 0.0 {
                lo = z;
            } else {
                hi = z;
            }
            let newton = z - v / d;
            let next = if newton.is_finite() && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if (next - z).abs() <= 1e-15 * (1.0 + z.abs()) || (hi - lo) <= 1e-15 * (1.0 + z.abs()) {
                return Ok(next.exp());
            }
            z = next;
        }
        Err(NonlinearityError::NonConvergent("inversion of F".into()))
    }

    /// All diagnostics at `s`.
    pub fn profile(&self, s: f64) -> Result<ProfileSample> {
        let big_f = self.structure(s)?;
        let fprime_val = self.fprime(s);
        Ok(ProfileSample {
            s,
            f_val: self.f(s),
            fprime_val,
            big_f,
            finv_of_f: self.structure_inv_ln(self.ln_structure(s)?)?,
            fprime_f: fprime_val * big_f,
        })
    }

    /// `2^k` for `k` from the first admissible power up to `2^40`.
    pub fn default_grid(&self) -> Vec<f64> {
        let floor = self.domain_floor();
        (-12..=40).map(|k| 2f64.powi(k)).filter(|&s| s > floor * (1.0 + 1e-12) && s > 0.0).collect()
    }

    fn check_positive(&self, grid: &[f64]) -> Result<()> {
        for &s in grid {
            let (v, d) = (self.f(s), self.fprime(s));
            if !(v > 0.0) {
                return Err(NonlinearityError::NonPositiveSource { u: s, value: v });
            }
            if !(d > 0.0) {
                return Err(NonlinearityError::InvalidParameter(format!("f' must be positive, f'({s}) = {d}")));
            }
        }
        Ok(())
    }

    fn tail_values(&self, grid: &[f64]) -> Result<Vec<f64>> {
        if grid.len() < 3 || grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(NonlinearityError::InvalidParameter("A grid must be strictly increasing with >= 3 points".into()));
        }
        let values = grid.iter().map(|&s| self.fprime_structure(s)).collect::<Result<Vec<f64>>>()?;
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(NonlinearityError::TailDivergence { s: grid[bad] });
        }
        Ok(values)
    }

    /// Side detection against a known limit; `a_hat` is NaN.
    fn unextrapolated(&self, grid: &[f64], a: f64) -> Result<AEstimate> {
        let values = self.tail_values(grid)?;
        let (side, start) = detect_side(&values, a, 1e-10 * a.abs().max(1.0));
        let s_threshold = start.map(|i| grid[i]).unwrap_or(*grid.last().unwrap());
        Ok(AEstimate { a_hat: f64::NAN, side, s_threshold, grid: grid.to_vec(), values })
    }

    /// Richardson-accelerated limit of `f′F` along a geometric grid plus the
    /// side on which the values settle.
    pub fn estimate_a(&self, grid: &[f64]) -> Result<AEstimate> {
        let values = self.tail_values(grid)?;
        let a_hat = richardson_limit(&values)?;
        let tol = match self.kind {
            Kind::Custom(_) => 1e-7 * a_hat.abs().max(1.0),
            _ => 1e-10 * a_hat.abs().max(1.0),
        };
        let (side, start) = detect_side(&values, a_hat, tol);
        let s_threshold = start.map(|i| grid[i]).unwrap_or(*grid.last().unwrap());
        Ok(AEstimate { a_hat, side, s_threshold, grid: grid.to_vec(), values })
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

impl FromStr for Nonlinearity {
    type Err = NonlinearityError;

    fn from_str(s: &str) -> Result<Self> {
        Nonlinearity::new(s.parse()?)
    }
}

/// Values within this relative distance count as numerical noise.
const NOISE: f64 = 1e-13;

fn richardson_limit(values: &[f64]) -> Result<f64> {
    let n = values.len();
    let mut estimates = Vec::with_capacity(n);
    for k in 2..n {
        let (a, b, c) = (values[k - 2], values[k - 1], values[k]);
        let d1 = b - a;
        let d2 = c - b;
        let noise = NOISE * c.abs().max(1.0);
        let est = if d2.abs() <= noise || d1.abs() <= noise {
            c
        } else if d1.signum() == d2.signum() && d2.abs() < d1.abs() {
            let r = d2 / d1;
            c + d2 * r / (1.0 - r)
        } else {
            c
        };
        estimates.push(est);
    }
    let last = *estimates.last().unwrap();
    let prev = estimates[estimates.len() - 2];
    if (last - prev).abs() > TOL_A {
        return Err(NonlinearityError::NonConvergent(format!("f'F tail estimates {prev} and {last} differ by more than {TOL_A}")));
    }
    Ok(last)
}

/// Longest suffix on which the values stay below (above) `a ± tol`; the side
/// needs at least `SIDE_STABLE_DOUBLINGS` consecutive steps.
fn detect_side(values: &[f64], a: f64, tol: f64) -> (Side, Option<usize>) {
    let n = values.len();
    let suffix_start = |pred: &dyn Fn(f64) -> bool| -> usize {
        let mut i = n;
        while i > 0 && pred(values[i - 1]) {
            i -= 1;
        }
        i
    };
    let below = suffix_start(&|v| v <= a + tol);
    let above = suffix_start(&|v| v >= a - tol);
    let need = SIDE_STABLE_DOUBLINGS + 1;
    let (lb, la) = (n - below, n - above);
    if lb < need && la < need {
        if n < need {
            return (Side::Unknown, None);
        }
        return (Side::Mixed, None);
    }
    if lb == la {
        (Side::Constant, Some(below))
    } else if lb > la {
        (Side::Below, Some(below))
    } else {
        (Side::Above, Some(above))
    }
}

/// `ln ∫ₛ^∞ du/(u^p + u^q)` via `u = e^z`; the integrand decays at least
/// like `e^{-(q-1)w}` so a finite window plus an exponential tail suffices.
fn power_sum_ln_structure(p: f64, q: f64, s: f64) -> Result<f64> {
    let phi = |z: f64| (1.0 - p) * z - softplus((q - p) * z);
    let z0 = s.ln();
    let phi0 = phi(z0);
    let width = 45.0 / (q - 1.0);
    let mut total = 0.0;
    let mut a = 0.0;
    let mut panel = 1.0 / (p - 1.0);
    while a < width {
        let b = (a + panel).min(width);
        // far panels sit in the subnormal range, so tolerance is relative to the running total
        let qd = integrate(|w| (phi(z0 + w) - phi0).exp(), a, b, 1e-16 * total, 1e-14)?;
        total += qd.value;
        a = b;
        panel *= 2.0;
        if qd.value < 1e-17 * total {
            break;
        }
    }
    let zt = z0 + a;
    let slope = (1.0 - p) + (p - q) / (1.0 + (-(q - p) * zt).exp());
    total += (phi(zt) - phi0).exp() / (-slope);
    Ok(phi0 + total.ln())
}

/// `ln F` for a user source: `u = s·e^w` panels of growing width with a
/// local power-law tail estimate `g(W)/(k_loc - 1)`.
fn custom_ln_structure(c: &CustomSource, s: f64) -> Result<f64> {
    if s <= 0.0 {
        // split at 1 so the substitution below never sees s = 0
        let head = integrate(
            |u| {
                let v = (c.f)(u);
                1.0 / v
            },
            s,
            1.0,
            0.0,
            1e-12,
        )?;
        let tail = custom_ln_structure(c, 1.0)?.exp();
        return Ok((head.value + tail).ln());
    }
    let ln_fs = (c.f)(s).ln();
    if !ln_fs.is_finite() {
        return Err(NonlinearityError::NonPositiveSource { u: s, value: (c.f)(s) });
    }
    let log_g = |w: f64| -> f64 {
        let u = s * w.exp();
        let fu = (c.f)(u);
        if fu == f64::INFINITY {
            return f64::NEG_INFINITY;
        }
        w + ln_fs - fu.ln()
    };
    let mut total = 0.0;
    let mut a: f64 = 0.0;
    let mut width = 0.5;
    for _ in 0..60 {
        let b = a + width;
        // NaN or non-positive source values surface here
        for probe in [a, 0.5 * (a + b), b] {
            let u = s * probe.exp();
            let fu = (c.f)(u);
            if !(fu > 0.0) {
                return Err(NonlinearityError::NonPositiveSource { u, value: fu });
            }
        }
        let qd = integrate(|w| log_g(w).exp(), a, b, 1e-300, 1e-12)?;
        total += qd.value;
        a = b;
        width *= 2.0;
        let u = s * a.exp();
        if !u.is_finite() {
            break;
        }
        let lg = log_g(a);
        if lg == f64::NEG_INFINITY {
            // f overflowed at finite u: the remaining mass is negligible
            return Ok(s.ln() - ln_fs + total.ln());
        }
        let k_loc = u * (c.f_prime)(u) / (c.f)(u);
        if k_loc > 1.0 {
            let tail = lg.exp() / (k_loc - 1.0);
            if tail <= 1e-12 * total {
                return Ok(s.ln() - ln_fs + (total + tail).ln());
            }
        }
    }
    Err(NonlinearityError::TailDivergence { s })
}

/// Evaluation interface used by the time steppers.
pub trait Source: Send + Sync {
    fn value(&self, u: f64) -> f64;
    /// Remaining ODE lifetime `∫_u^∞ dv/f(v)` when available.
    fn remaining_time(&self, _u: f64) -> Option<f64> {
        None
    }
}

impl Source for Nonlinearity {
    fn value(&self, u: f64) -> f64 {
        self.f(u)
    }

    fn remaining_time(&self, u: f64) -> Option<f64> {
        self.structure(u).ok()
    }
}

/// `c·u^p` on `u ≥ 0`; the auxiliary equation of the power-type transform.
#[derive(Debug, Clone, Copy)]
pub struct ScaledPower {
    pub coef: f64,
    pub p: f64,
}

impl Source for ScaledPower {
    fn value(&self, u: f64) -> f64 {
        self.coef * u.max(0.0).powf(self.p)
    }

    fn remaining_time(&self, u: f64) -> Option<f64> {
        Some(u.powf(1.0 - self.p) / (self.coef * (self.p - 1.0)))
    }
}

/// `e^w`; the auxiliary equation of the log transform.
#[derive(Debug, Clone, Copy)]
pub struct ExpSource;

impl Source for ExpSource {
    fn value(&self, u: f64) -> f64 {
        u.exp()
    }

    fn remaining_time(&self, u: f64) -> Option<f64> {
        Some((-u).exp())
    }
}

/// A source whose derivative and tail integral `G(v) = ∫_v^∞ dw/g(w)` are
/// known; the input side of a Cole–Hopf type transform.
pub trait StructuredSource: Source {
    fn derivative(&self, v: f64) -> f64;
    /// `ln G(v)`.
    fn ln_tail(&self, v: f64) -> Result<f64>;
}

impl StructuredSource for Nonlinearity {
    fn derivative(&self, v: f64) -> f64 {
        self.fprime(v)
    }

    fn ln_tail(&self, v: f64) -> Result<f64> {
        self.ln_structure(v)
    }
}

impl StructuredSource for ScaledPower {
    fn derivative(&self, v: f64) -> f64 {
        self.coef * self.p * v.max(0.0).powf(self.p - 1.0)
    }

    fn ln_tail(&self, v: f64) -> Result<f64> {
        if !(v > 0.0) {
            return Err(NonlinearityError::OutOfDomain { s: v, floor: 0.0 });
        }
        Ok((1.0 - self.p) * v.ln() - (self.coef * (self.p - 1.0)).ln())
    }
}

impl StructuredSource for ExpSource {
    fn derivative(&self, v: f64) -> f64 {
        v.exp()
    }

    fn ln_tail(&self, v: f64) -> Result<f64> {
        Ok(-v)
    }
}

/// Any closure as a source (used for near-zero sources in sanity runs).
pub struct FnSource<F: Fn(f64) -> f64 + Send + Sync>(pub F);

impl<F: Fn(f64) -> f64 + Send + Sync> Source for FnSource<F> {
    fn value(&self, u: f64) -> f64 {
        (self.0)(u)
    }
}
