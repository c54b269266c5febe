//! Existence / nonexistence verdicts from `(N, r, A, side)` and the
//! refinement behaviour of `‖F(u₀)^{-r}‖_{1,ul,ρ}`, plus lower bounds on the
//! existence time.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::uloc::{classification_integral, refine_trend, uloc_l1_of, uloc_norm, Trend, UlocError, UlocParams};
use crate::grid::{Boundary, Geometry, GridError, GridField};
use crate::nonlinearity::{Kind, Nonlinearity, NonlinearityError, Side};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("invalid input: {0}")]
    BadInput(String),
    #[error("left side is not nondecreasing in T near T = {t}")]
    NotMonotone { t: f64 },
    #[error("verdict fails its own audit: {0}")]
    Audit(String),
    #[error(transparent)]
    Uloc(#[from] UlocError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Nonlinearity(#[from] NonlinearityError),
}

pub type Result<T> = std::result::Result<T, ClassifyError>;

/// Slack for `r = N/2` and `r = A - 1` comparisons.
const TOL_EQ: f64 = 1e-12;
/// Ambiguous refinement trends whose last three values stay this close
/// (relative spread) are read as a finite integral.
const FLAT_SPREAD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    SubcriticalExists,
    CriticalExists,
    NonexistenceWitness,
    RapidGrowthNonexistence,
    Indeterminate,
}

/// Which statement a verdict rests on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Citation {
    /// `f′F ≤ A`, `r ≥ A-1`, `r > N/2`.
    GeneralSubcritical,
    /// `f′F ≤ A`, `r = N/2 > A-1`.
    GeneralCritical,
    /// `f′F ≥ A`, `A-1 < N/2`, `r` below `N/2`.
    GeneralNonexistence,
    /// `A = 1`, `f′F ≤ 1`, `r < N/2`.
    RapidGrowth,
    /// `u^p + u^q`, read through the `2(u + u^p)` majorant where needed.
    PowerSumFamily,
    /// `e^{u²}`.
    ExpSquareFamily,
    None,
}

/// How the verdict conditions were checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    General,
    /// Family statement for `u^p + u^q`, which does not need the side condition.
    PowerSumFamily,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum IntegralStatus {
    Finite { value: f64 },
    Diverging { rate: f64, logarithmic: bool },
    Ambiguous { value: f64 },
}

impl IntegralStatus {
    pub fn is_finite(&self) -> bool {
        matches!(self, IntegralStatus::Finite { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictInputs {
    pub n: usize,
    pub r: f64,
    pub a: f64,
    pub side: Side,
    pub integral: IntegralStatus,
    pub rho: f64,
    pub route: Route,
    /// `(h, integral)` per refinement level, coarse to fine.
    pub levels: Vec<(f64, f64)>,
    pub nonlinearity: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub regime: Regime,
    pub theorem: Citation,
    pub inputs: VerdictInputs,
    pub time_bound: Option<ExistenceTimeBound>,
    /// Norm in which `u(t) - e^{tΔ}u₀ → 0` is claimed for existence regimes.
    pub convergence_norm: Option<String>,
    pub notes: Vec<String>,
}

fn is_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL_EQ * a.abs().max(b.abs()).max(1.0)
}

impl Verdict {
    /// Re-checks the conditions the regime requires.
    pub fn audit(&self) -> Result<()> {
        let i = &self.inputs;
        let half = i.n as f64 / 2.0;
        let exp_type = is_eq(i.a, 1.0);
        let family = i.route == Route::PowerSumFamily;
        let below = family || i.side.is_below();
        let above = family || i.side.is_above();
        let fail = |m: &str| Err(ClassifyError::Audit(format!("{:?}: {m}", self.regime)));
        match self.regime {
            Regime::SubcriticalExists => {
                if !(i.r >= i.a - 1.0 - TOL_EQ && i.r > half && !is_eq(i.r, half)) {
                    return fail("needs r ≥ A-1 and r > N/2");
                }
                if !below {
                    return fail("needs f'F ≤ A");
                }
                if !i.integral.is_finite() {
                    return fail("needs a finite integral");
                }
            }
            Regime::CriticalExists => {
                if !(is_eq(i.r, half) && half > i.a - 1.0 && !is_eq(half, i.a - 1.0)) {
                    return fail("needs r = N/2 > A-1");
                }
                if !below {
                    return fail("needs f'F ≤ A");
                }
                if !i.integral.is_finite() {
                    return fail("needs a finite integral");
                }
            }
            Regime::NonexistenceWitness => {
                let range = if exp_type { i.r > 0.0 } else { i.r >= i.a - 1.0 - TOL_EQ };
                if !(range && i.r < half && !is_eq(i.r, half)) {
                    return fail("needs A-1 ≤ r < N/2 (or 0 < r < N/2 when A = 1)");
                }
                if !above {
                    return fail("needs f'F ≥ A");
                }
            }
            Regime::RapidGrowthNonexistence => {
                if !(exp_type && i.side.is_below() && i.r > 0.0 && i.r < half && !is_eq(i.r, half)) {
                    return fail("needs A = 1, f'F ≤ 1, 0 < r < N/2");
                }
            }
            Regime::Indeterminate => {}
        }
        Ok(())
    }
}

/// Time-bound inequality shapes. `norm` is the data quantity each one is
/// stated with; `γ_ε = γ·ε^{-c_ε}` for the `ε` forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeBoundForm {
    /// `T^{N/2(1-1/A)}ρ^{-N(1-1/A)} + norm·(T^{r-N/(2A)}ρ^{-N(A-1)/A} + T^{r-N/2})`,
    /// `norm = max{‖F(u₀)^{-r}‖_{1,ul,ρ}, F(s₁)^{-r}ρ^N}`.
    GeneralPower,
    /// `T^{εN/2}ρ^{-εN} + γ_ε·norm·(T^{r-N/2(1-ε)}ρ^{-εN} + T^{r-N/2})`, same norm.
    GeneralExp,
    /// `T^{N/(2p)}ρ^{-N/p} + norm·(T^{r/(p-1)-N/2·(p-1)/p}ρ^{-N/p} + T^{r/(p-1)-N/2})`,
    /// `norm = ‖u₀‖_{r,ul,ρ}^r` for `u^p`.
    PowerModel,
    /// `T^{εN/2}ρ^{-εN} + γ_ε·norm·(T^{r-N/2(1-ε)}ρ^{-εN} + T^{r-N/2})`,
    /// `norm = ‖e^{ru₀}‖_{1,ul,ρ}` for `e^u`.
    ExpModel,
    /// `T^{N/(2p)}ρ^{-N/p} + norm·(T^{r-N/2·(p-1)/p}ρ^{-N/p} + T^{r-N/2})`,
    /// `norm = max{‖u₀‖^{r(p-1)}_{r(p-1),ul,ρ}, ρ^N}` for `u^p + u^q`.
    PowerSumFamily,
    /// As `ExpModel` with `norm = max{‖u₀^r e^{ru₀²}‖_{1,ul,ρ}, ρ^N}` for `e^{u²}`.
    ExpSquareFamily,
}

impl TimeBoundForm {
    pub fn uses_epsilon(self) -> bool {
        matches!(self, TimeBoundForm::GeneralExp | TimeBoundForm::ExpModel | TimeBoundForm::ExpSquareFamily)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBoundParams {
    pub form: TimeBoundForm,
    pub n: usize,
    pub r: f64,
    pub rho: f64,
    /// `A` for `GeneralPower`, `p` for the power model and family forms.
    pub exponent: f64,
    pub gamma: f64,
    pub epsilon: Option<f64>,
    /// `c_ε`; `2r` when absent.
    pub c_eps: Option<f64>,
}

impl TimeBoundParams {
    pub fn new(form: TimeBoundForm, n: usize, r: f64, rho: f64, exponent: f64) -> Self {
        TimeBoundParams { form, n, r, rho, exponent, gamma: 1.0, epsilon: form.uses_epsilon().then_some(0.1), c_eps: None }
    }

    pub fn gamma_eps(&self) -> Option<f64> {
        self.epsilon.map(|e| self.gamma * e.powf(-self.c_eps.unwrap_or(2.0 * self.r)))
    }

    /// `(coefficient, exponent of T)` terms of the left side for `norm`.
    pub fn terms(&self, norm: f64) -> Vec<(f64, f64)> {
        let n = self.n as f64;
        let (r, rho) = (self.r, self.rho);
        match self.form {
            TimeBoundForm::GeneralPower => {
                let a = self.exponent;
                vec![
                    (rho.powf(-n * (1.0 - 1.0 / a)), 0.5 * n * (1.0 - 1.0 / a)),
                    (norm * rho.powf(-n * (a - 1.0) / a), r - n / (2.0 * a)),
                    (norm, r - 0.5 * n),
                ]
            }
            TimeBoundForm::GeneralExp | TimeBoundForm::ExpModel | TimeBoundForm::ExpSquareFamily => {
                let e = self.epsilon.unwrap_or(0.1);
                let ge = self.gamma_eps().unwrap_or(self.gamma);
                vec![(rho.powf(-e * n), 0.5 * e * n), (ge * norm * rho.powf(-e * n), r - 0.5 * n * (1.0 - e)), (ge * norm, r - 0.5 * n)]
            }
            TimeBoundForm::PowerModel => {
                let p = self.exponent;
                vec![
                    (rho.powf(-n / p), n / (2.0 * p)),
                    (norm * rho.powf(-n / p), r / (p - 1.0) - 0.5 * n * (p - 1.0) / p),
                    (norm, r / (p - 1.0) - 0.5 * n),
                ]
            }
            TimeBoundForm::PowerSumFamily => {
                let p = self.exponent;
                vec![(rho.powf(-n / p), n / (2.0 * p)), (norm * rho.powf(-n / p), r - 0.5 * n * (p - 1.0) / p), (norm, r - 0.5 * n)]
            }
        }
    }

    pub fn lhs(&self, t: f64, norm: f64) -> f64 {
        self.terms(norm).iter().map(|(c, k)| c * t.powf(*k)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExistenceTimeBound {
    pub params: TimeBoundParams,
    pub norm_value: f64,
    pub t_lower: f64,
    /// The left side already exceeds `γ` at the probe floor.
    pub no_root: bool,
}

/// Smallest `T` probed.
pub const T_FLOOR: f64 = 1e-30;

/// Largest `T` with the left side still ≤ `γ` (the equality point), by
/// bisection in `log T`.
pub fn existence_time_lower_bound(params: &TimeBoundParams, norm_value: f64) -> Result<ExistenceTimeBound> {
    let p = params;
    if !(p.gamma > 0.0 && p.rho > 0.0 && p.r > 0.0 && norm_value >= 0.0 && norm_value.is_finite() && p.n >= 1) {
        return Err(ClassifyError::BadInput(format!("gamma {} rho {} r {} norm {norm_value}", p.gamma, p.rho, p.r)));
    }
    if let Some(e) = p.epsilon.filter(|_| p.form.uses_epsilon()) {
        if !(e > 0.0 && e < 1.0) {
            return Err(ClassifyError::BadInput(format!("epsilon = {e}")));
        }
    }
    let terms = p.terms(norm_value);
    // every power must grow with T for the bisection to be meaningful
    if terms.iter().any(|(c, k)| *c > 0.0 && !(*k > 0.0)) {
        return Err(ClassifyError::NotMonotone { t: T_FLOOR });
    }
    let lhs = |t: f64| p.lhs(t, norm_value);
    let mut prev = lhs(T_FLOOR);
    let mut t = T_FLOOR;
    while t < 1e30 {
        t *= 10.0;
        let v = lhs(t);
        if v < prev {
            return Err(ClassifyError::NotMonotone { t });
        }
        prev = v;
    }
    if lhs(T_FLOOR) >= p.gamma {
        return Ok(ExistenceTimeBound { params: *p, norm_value, t_lower: T_FLOOR, no_root: true });
    }
    let mut lo = T_FLOOR;
    let mut hi = 1.0;
    while lhs(hi) < p.gamma {
        lo = hi;
        hi *= 10.0;
        if hi > 1e300 {
            return Err(ClassifyError::BadInput("left side never reaches gamma".into()));
        }
    }
    for _ in 0..400 {
        let mid = (lo.ln() + 0.5 * (hi.ln() - lo.ln())).exp();
        if mid <= lo || mid >= hi {
            break;
        }
        if lhs(mid) < p.gamma {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-15 {
            break;
        }
    }
    let t_lower = if (lhs(lo) - p.gamma).abs() <= (lhs(hi) - p.gamma).abs() { lo } else { hi };
    Ok(ExistenceTimeBound { params: *p, norm_value, t_lower, no_root: false })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub n: usize,
    pub a: f64,
    pub r_critical: f64,
    pub r_floor: f64,
    /// `A - 1 < N/2`: the nonexistence statements have room to apply.
    pub nonexistence_applies: bool,
    pub gap_note: Option<String>,
    /// For `u^p`: `N(p-1)/2`, the critical Lebesgue exponent of `u₀`.
    pub power_critical_lebesgue: Option<f64>,
}

pub fn threshold_report(nl: &Nonlinearity, n: usize) -> ThresholdReport {
    let a = nl.a_value();
    let half = n as f64 / 2.0;
    let nonexistence_applies = a - 1.0 < half;
    let gap_note = (!nonexistence_applies)
        .then(|| format!("A - 1 = {} ≥ N/2 = {half}: no nonexistence statement applies, and r in (N/2, A-1) is not covered", a - 1.0));
    let power_critical_lebesgue = match nl.kind() {
        Kind::Power { p } | Kind::PowerSum { p, .. } => Some(half * (p - 1.0)),
        _ => None,
    };
    ThresholdReport { n, a, r_critical: half, r_floor: (a - 1.0).max(0.0), nonexistence_applies, gap_note, power_critical_lebesgue }
}

/// Every other node, keeping the box (periodic: even counts; extended: odd).
fn coarsen(u: &GridField) -> Option<GridField> {
    let g = &u.geometry;
    let ok = g.extents.iter().all(|&n| match g.boundary {
        Boundary::Periodic => n % 2 == 0 && n >= 8,
        Boundary::ConstantExtension { .. } => n % 2 == 1 && n >= 9,
    });
    if !ok {
        return None;
    }
    let extents: Vec<usize> = g.extents.iter().map(|&n| if g.is_periodic() { n / 2 } else { n.div_ceil(2) }).collect();
    let coarse = Geometry { origin: g.origin.clone(), spacing: 2.0 * g.spacing, extents, boundary: g.boundary };
    let off = 3 - g.dim();
    let values = (0..coarse.len())
        .map(|i| {
            let mut idx = coarse.unravel(i);
            for c in &mut idx[off..] {
                *c *= 2;
            }
            u.values[g.ravel(idx)]
        })
        .collect();
    Some(GridField { geometry: coarse, values })
}

/// The field with two successive coarsenings, coarse to fine.
pub fn subsampled_levels(u0: &GridField) -> Vec<GridField> {
    let mut levels = vec![u0.clone()];
    while levels.len() < 3 {
        match coarsen(&levels[0]) {
            Some(c) => levels.insert(0, c),
            None => break,
        }
    }
    levels
}

fn integral_status(levels: &[(f64, f64)], maxima: &[f64], notes: &mut Vec<String>) -> Result<IntegralStatus> {
    let finest = levels.last().map(|l| l.1).unwrap_or(f64::NAN);
    if levels.len() < 3 {
        notes.push(format!("only {} refinement level(s); grid data are bounded, integral taken as finite", levels.len()));
        return Ok(IntegralStatus::Finite { value: finest });
    }
    Ok(match refine_trend(levels)? {
        Trend::Converging { .. } => IntegralStatus::Finite { value: finest },
        Trend::Diverging { rate, logarithmic } => IntegralStatus::Diverging { rate, logarithmic },
        Trend::Ambiguous { .. } => {
            let tail: Vec<f64> = levels[levels.len() - 3..].iter().map(|l| l.1).collect();
            let (lo, hi) = tail.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
            let (m0, m1) = (maxima[0], maxima[maxima.len() - 1]);
            if hi <= lo * (1.0 + FLAT_SPREAD) {
                notes.push("refinement increments irregular but within 5%: read as finite".into());
                IntegralStatus::Finite { value: finest }
            } else if m1 <= m0 * (1.0 + FLAT_SPREAD) {
                // F(u)^{-r} ≤ F(max u)^{-r} on every ball
                notes.push(format!("data bounded under refinement (max {m0:.6e} -> {m1:.6e}): integral read as finite"));
                IntegralStatus::Finite { value: finest }
            } else {
                IntegralStatus::Ambiguous { value: finest }
            }
        }
    })
}

/// Verdict for `u₀` given at one resolution; the trend uses two subsampled
/// coarser copies.
pub fn classify(nl: &Nonlinearity, u0: &GridField, n: usize, r: f64, rho: f64) -> Result<Verdict> {
    classify_levels(nl, &subsampled_levels(u0), n, r, rho, 1.0)
}

/// Verdict for data given on successive refinements (coarse to fine).
pub fn classify_levels(nl: &Nonlinearity, levels: &[GridField], n: usize, r: f64, rho: f64, gamma: f64) -> Result<Verdict> {
    if levels.is_empty() {
        return Err(ClassifyError::BadInput("no data".into()));
    }
    if !(r > 0.0 && rho > 0.0 && r.is_finite()) {
        return Err(ClassifyError::BadInput(format!("r = {r}, rho = {rho}")));
    }
    for u in levels {
        if u.dim() != n {
            return Err(ClassifyError::BadInput(format!("N = {n} but data are {}-dimensional", u.dim())));
        }
        if let Some(i) = u.values.iter().position(|&v| v < 0.0) {
            return Err(ClassifyError::BadInput(format!("u0 negative at index {i}")));
        }
    }
    let mut notes = Vec::new();
    let pts = levels.iter().map(|u| Ok((u.spacing(), classification_integral(u, nl, r, rho)?.value))).collect::<Result<Vec<_>>>()?;
    let maxima: Vec<f64> = levels.iter().map(|u| u.max()).collect();
    let integral = integral_status(&pts, &maxima, &mut notes)?;
    let a = nl.a_value();
    let side = nl.side();
    let route = if matches!(nl.kind(), Kind::PowerSum { .. }) { Route::PowerSumFamily } else { Route::General };
    if nl.side_is_heuristic() {
        notes.push("side estimated from samples".into());
    }
    if route == Route::PowerSumFamily {
        notes.push(format!("u^p + u^q read through its family statement (side {side:?} not required)"));
    }
    let inputs = VerdictInputs { n, r, a, side, integral, rho, route, levels: pts, nonlinearity: nl.name() };
    let family = match nl.kind() {
        Kind::PowerSum { .. } => Some(Citation::PowerSumFamily),
        Kind::ExpSquare => Some(Citation::ExpSquareFamily),
        _ => None,
    };
    let (regime, theorem) = decide(&inputs, family, &mut notes);

    let exp_type = nl.is_exponential_type();
    let convergence_norm = matches!(regime, Regime::SubcriticalExists | Regime::CriticalExists).then(|| {
        if exp_type {
            "L^inf".to_string()
        } else {
            format!("L^{}_ul,rho", r / (a - 1.0))
        }
    });
    let time_bound =
        if regime == Regime::SubcriticalExists { Some(attach_bound(nl, levels.last().unwrap(), &inputs, gamma)?) } else { None };
    if matches!(regime, Regime::SubcriticalExists | Regime::CriticalExists) && !exp_type {
        notes.push("convergence is to e^{tΔ}u0, not to u0 in the stronger sense".into());
    }
    let v = Verdict { regime, theorem, inputs, time_bound, convergence_norm, notes };
    v.audit()?;
    Ok(v)
}

fn decide(i: &VerdictInputs, family_cite: Option<Citation>, notes: &mut Vec<String>) -> (Regime, Citation) {
    let half = i.n as f64 / 2.0;
    let exp_type = is_eq(i.a, 1.0);
    let family = i.route == Route::PowerSumFamily;
    if !family && matches!(i.side, Side::Mixed | Side::Unknown) {
        notes.push(format!("side {:?}: no statement applies", i.side));
        return (Regime::Indeterminate, Citation::None);
    }
    let below = family || i.side.is_below();
    let above = family || i.side.is_above();
    let cite = |general: Citation| family_cite.unwrap_or(general);
    let r_eq_half = is_eq(i.r, half);
    if i.r > half && !r_eq_half {
        if i.r < i.a - 1.0 - TOL_EQ {
            notes.push("r in (N/2, A-1): not covered".into());
            return (Regime::Indeterminate, Citation::None);
        }
        if !below {
            notes.push("f'F ≤ A fails: existence statement does not apply".into());
            return (Regime::Indeterminate, Citation::None);
        }
        return match i.integral {
            IntegralStatus::Finite { .. } => (Regime::SubcriticalExists, cite(Citation::GeneralSubcritical)),
            IntegralStatus::Diverging { .. } => {
                notes.push("F(u0)^{-r} not uniformly locally integrable: data outside the class".into());
                (Regime::Indeterminate, Citation::None)
            }
            IntegralStatus::Ambiguous { .. } => {
                notes.push("refinement trend ambiguous".into());
                (Regime::Indeterminate, Citation::None)
            }
        };
    }
    if r_eq_half {
        if !(half > i.a - 1.0 && !is_eq(half, i.a - 1.0)) {
            notes.push("r = N/2 ≤ A-1: critical statement needs N/2 > A-1".into());
            return (Regime::Indeterminate, Citation::None);
        }
        if !below {
            notes.push("f'F ≤ A fails: existence statement does not apply".into());
            return (Regime::Indeterminate, Citation::None);
        }
        return match i.integral {
            IntegralStatus::Finite { .. } => {
                notes.push(
                    "critical case needs F(u0)^{-N/2} in the closure of bounded functions; checked as a finite, converging integral".into(),
                );
                (Regime::CriticalExists, cite(Citation::GeneralCritical))
            }
            _ => {
                notes.push("critical integral not finite at this resolution".into());
                (Regime::Indeterminate, Citation::None)
            }
        };
    }
    // r < N/2
    if exp_type {
        if above {
            return (Regime::NonexistenceWitness, cite(Citation::GeneralNonexistence));
        }
        return (Regime::RapidGrowthNonexistence, cite(Citation::RapidGrowth));
    }
    if i.a - 1.0 >= half {
        notes.push("A-1 ≥ N/2: nonexistence statement does not apply".into());
        return (Regime::Indeterminate, Citation::None);
    }
    if i.r < i.a - 1.0 - TOL_EQ {
        notes.push("r < A-1: below the admissible range".into());
        return (Regime::Indeterminate, Citation::None);
    }
    if !above {
        notes.push("f'F ≥ A fails and no family statement is available".into());
        return (Regime::Indeterminate, Citation::None);
    }
    (Regime::NonexistenceWitness, cite(Citation::GeneralNonexistence))
}

/// Picks the time-bound form that matches the nonlinearity and evaluates its
/// data norm on the finest level.
fn attach_bound(nl: &Nonlinearity, u0: &GridField, i: &VerdictInputs, gamma: f64) -> Result<ExistenceTimeBound> {
    let (n, r, rho) = (i.n, i.r, i.rho);
    let ball = rho.powi(n as i32);
    let (form, exponent, norm) = match nl.kind() {
        Kind::PowerSum { p, .. } => {
            let q = r * (p - 1.0);
            let nv = uloc_norm(u0, UlocParams::new(q, rho))?.powf(q);
            (TimeBoundForm::PowerSumFamily, *p, nv.max(ball))
        }
        Kind::ExpSquare => {
            let nv = uloc_l1_of(u0, rho, |s| s.powf(r) * (r * s * s).exp())?;
            (TimeBoundForm::ExpSquareFamily, 1.0, nv.max(ball))
        }
        _ => {
            let floor = (-r * nl.ln_structure(nl.s_threshold()).unwrap_or(f64::INFINITY)).exp() * ball;
            let iv = match i.integral {
                IntegralStatus::Finite { value } => value,
                _ => f64::NAN,
            };
            let form = if nl.is_exponential_type() { TimeBoundForm::GeneralExp } else { TimeBoundForm::GeneralPower };
            (form, i.a, iv.max(floor))
        }
    };
    let mut params = TimeBoundParams::new(form, n, r, rho, exponent);
    params.gamma = gamma;
    existence_time_lower_bound(&params, norm)
}
