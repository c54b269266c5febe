//! End-to-end acceptance checks, one line per criterion.
//!
//! Runs without the libtest harness so the PASS/FAIL lines always show;
//! the process exits non-zero when any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use superheat::classify::{classify, existence_time_lower_bound, Regime, TimeBoundForm, TimeBoundParams};
use superheat::evolve::{
    build_supersolution, imex_evolve, imex_evolve_source, picard_monotone, weissler_a, weissler_a_closed, weissler_certificate,
    weissler_ck, EvolveConfig, ImexOutcome,
};
use superheat::grid::uloc::{ball_node_count, uloc_norm, Exponent, UlocParams};
use superheat::grid::{Geometry, GridField};
use superheat::heat::{smoothing_ratio, SemigroupMethod};
use superheat::nonlinearity::bounds::{disjoint_log_grids, fit_and_assert};
use superheat::nonlinearity::{ExpSource, Kind, ScaledPower};
use superheat::numerics::log_grid;
use superheat::singular::{exp_singular, ConvexGrowth};
use superheat::transforms::{
    general_transform_residual, invariant_integral, quasi_scale, quasi_scale_onto, quasi_scaled_residual, residual_order, SpaceTimeField,
    TransformReport,
};
use superheat::{Nonlinearity, Side};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn built_ins() -> Vec<Nonlinearity> {
    vec![
        Nonlinearity::power(1.5).unwrap(),
        Nonlinearity::power(2.0).unwrap(),
        Nonlinearity::power(3.0).unwrap(),
        Nonlinearity::power_sum(3.0, 2.0).unwrap(),
        Nonlinearity::power_sum(4.0, 2.0).unwrap(),
        Nonlinearity::exponential(),
        Nonlinearity::exp_square(),
    ]
}

fn bump(geometry: Geometry, base: f64, amp: f64, width: f64) -> GridField {
    GridField::from_fn(geometry, |x| base + amp * (-x.iter().map(|c| c * c).sum::<f64>() / (width * width)).exp()).unwrap()
}

// ---------------------------------------------------------------- 1

/// `∫_s^∞ e^{-u²} du = e^{-s²} ∫_0^∞ e^{-2st - t²} dt`, the last integral by
/// composite Simpson; returns its log.
fn ln_gauss_tail(s: f64) -> f64 {
    let upper = -s + (s * s + 60.0).sqrt();
    let m = 40_000;
    let h = upper / m as f64;
    let g = |t: f64| (-2.0 * s * t - t * t).exp();
    let mut acc = g(0.0) + g(upper);
    for i in 1..m {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
    }
    -s * s + (acc * h / 3.0).ln()
}

fn criterion_1() -> Outcome {
    let grid = log_grid(1e-3, 1e3, 121);
    let mut worst_pow = 0.0f64;
    for p in [1.5, 2.0, 3.0] {
        let nl = Nonlinearity::power(p).unwrap();
        for &s in &grid {
            let exact = s.powf(1.0 - p) / (p - 1.0);
            let e1 = rel(nl.structure(s).unwrap(), exact);
            let inv_exact = ((p - 1.0) * exact).powf(-1.0 / (p - 1.0));
            let e2 = rel(nl.structure_inv(exact).unwrap(), inv_exact);
            worst_pow = worst_pow.max(e1).max(e2);
        }
    }
    ensure!(worst_pow <= 1e-10, "power closed form off by {worst_pow:e}");

    let nl = Nonlinearity::exponential();
    let mut worst_exp = 0.0f64;
    for &s in &grid {
        // relative error in F is the absolute error in ln F
        worst_exp = worst_exp.max((nl.ln_structure(s).unwrap() + s).abs());
        worst_exp = worst_exp.max(rel(nl.structure_inv_ln(-s).unwrap(), s));
    }
    ensure!(worst_exp <= 1e-10, "exponential closed form off by {worst_exp:e}");

    let nl = Nonlinearity::exp_square();
    let mut worst_sq = 0.0f64;
    for &s in &grid {
        let oracle = ln_gauss_tail(s);
        worst_sq = worst_sq.max((nl.ln_structure(s).unwrap() - oracle).abs());
        worst_sq = worst_sq.max(rel(nl.structure_inv_ln(oracle).unwrap(), s));
    }
    ensure!(worst_sq <= 1e-8, "e^(u^2) against the Gaussian-tail oracle off by {worst_sq:e}");
    Ok(format!("power {worst_pow:.1e}, exp {worst_exp:.1e}, expsq {worst_sq:.1e}"))
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Outcome {
    let mut worst = 0.0f64;
    let mut cases = Vec::new();
    for p in [1.5, 2.0, 3.0, 5.0] {
        cases.push((Nonlinearity::power(p).unwrap(), p / (p - 1.0)));
    }
    for (p, q) in [(3.0, 2.0), (4.0, 2.0), (5.0, 1.5), (2.5, 2.0)] {
        cases.push((Nonlinearity::power_sum(p, q).unwrap(), p / (p - 1.0)));
    }
    cases.push((Nonlinearity::exponential(), 1.0));
    cases.push((Nonlinearity::exp_square(), 1.0));
    for (nl, expected) in &cases {
        let est = nl.estimate_a(&nl.default_grid()).map_err(|e| e.to_string())?;
        let d = (est.a_hat - expected).abs();
        ensure!(d <= 1e-6, "{}: A = {} expected {expected}", nl.name(), est.a_hat);
        worst = worst.max(d);
    }
    // floor over the corpus, including user-supplied sources
    let mut corpus: Vec<Nonlinearity> = cases.into_iter().map(|c| c.0).collect();
    corpus.push(Nonlinearity::custom("(1+u)^2", |u| (1.0 + u).powi(2), |u| 2.0 * (1.0 + u), 0.0).unwrap());
    corpus.push(Nonlinearity::custom("u^2+u", |u| u * u + u, |u| 2.0 * u + 1.0, 0.0).unwrap());
    corpus.push(Nonlinearity::custom("u^3+2u", |u| u.powi(3) + 2.0 * u, |u| 3.0 * u * u + 2.0, 0.0).unwrap());
    let min_a = corpus.iter().map(|nl| nl.a_value()).fold(f64::INFINITY, f64::min);
    ensure!(min_a >= 1.0 - 1e-6, "A = {min_a} below 1");
    Ok(format!("max |A - A_exact| = {worst:.1e}; min A over {} sources = {min_a:.6}", corpus.len()))
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Outcome {
    let mut worst_nodes = 0.0f64;
    let mut worst_interp = 0.0f64;
    let mut worst_analytic = 0.0f64;
    for p in [1.5, 2.0, 3.0] {
        let nl = Nonlinearity::power(p).unwrap();
        let e = 2.0 / (p - 1.0);
        for lambda in [0.5, 2.0, 3.0] {
            // torus: nodes of the dilated grid land on the input nodes
            let u0 = bump(Geometry::periodic_cube(2, 32, 8.0).unwrap(), 0.3, 1.0, 1.0);
            let ul = quasi_scale(&u0, &nl, lambda).unwrap();
            for (a, b) in ul.values.iter().zip(&u0.values) {
                worst_nodes = worst_nodes.max(rel(*a, lambda.powf(e) * b));
            }
            // extended box: u₀(λx) by interpolation
            let g = Geometry::extended_cube(1, 801, 0.01, 0.3).unwrap();
            let u0 = bump(g.clone(), 0.3, 1.0, 1.0);
            let ul = quasi_scale(&u0, &nl, lambda).unwrap();
            for i in 0..g.len() {
                let x = g.position(i)[0];
                let v = ul.values[i];
                worst_interp = worst_interp.max(rel(v, lambda.powf(e) * u0.interpolate(&[lambda * x])));
                let exact = lambda.powf(e) * (0.3 + (-(lambda * x).powi(2)).exp());
                worst_analytic = worst_analytic.max(rel(v, exact));
            }
        }
    }
    ensure!(worst_nodes <= 1e-10, "torus nodes off by {worst_nodes:e}");
    ensure!(worst_interp <= 1e-10, "interpolated nodes off by {worst_interp:e}");
    // linear interpolation of a unit-width Gaussian at h = 0.01
    ensure!(worst_analytic <= 1e-4, "analytic profile off by {worst_analytic:e}");
    Ok(format!("torus {worst_nodes:.1e}, interpolant {worst_interp:.1e}, analytic {worst_analytic:.1e}"))
}

// ---------------------------------------------------------------- 4

/// Dilated torus shifted by half a cell, so every node is interpolated.
fn shifted_dilation(g: &Geometry, lambda: f64) -> Geometry {
    let mut d = g.dilated(lambda);
    let half = 0.5 * d.spacing;
    d.origin.iter_mut().for_each(|o| *o += half);
    d
}

fn criterion_4() -> Outcome {
    let mut worst_exact = 0.0f64;
    let mut finest_drift = 0.0f64;
    for nl in built_ins() {
        for lambda in [0.5, 2.0] {
            let mut drifts = Vec::new();
            for n in [256, 512, 1024] {
                let g = Geometry::periodic_cube(1, n, 8.0).unwrap();
                let u0 = bump(g.clone(), 2.0, 1.0, 1.0);
                let i0 = invariant_integral(&u0, &nl, 1).unwrap();
                let exact = invariant_integral(&quasi_scale(&u0, &nl, lambda).unwrap(), &nl, 1).unwrap();
                worst_exact = worst_exact.max(rel(exact, i0));
                let sampled = quasi_scale_onto(&u0, &nl, lambda, &shifted_dilation(&g, lambda)).unwrap();
                drifts.push(rel(invariant_integral(&sampled, &nl, 1).unwrap(), i0));
            }
            let name = nl.name();
            ensure!(drifts[2] <= 1e-3, "{name} λ={lambda}: drift {:e} at the finest grid", drifts[2]);
            // F(u)^{-1/2} linear in u (u³) is reproduced exactly by linear interpolation
            let exact_already = drifts.iter().all(|d| *d <= 1e-13);
            ensure!(
                exact_already || (drifts[0] > drifts[1] && drifts[1] > drifts[2]),
                "{name} λ={lambda}: drifts {drifts:?} not decreasing"
            );
            finest_drift = finest_drift.max(drifts[2]);
        }
    }
    ensure!(worst_exact <= 1e-12, "node-aligned drift {worst_exact:e}");
    Ok(format!("node-aligned drift {worst_exact:.1e}; interpolated drift at n = 1024 ≤ {finest_drift:.1e}, decreasing under refinement"))
}

// ---------------------------------------------------------------- 5

fn solve(nl_or_src: &dyn Fn(&GridField, &EvolveConfig) -> SpaceTimeField, level: usize) -> SpaceTimeField {
    let n = 32 << level;
    let scale = 0.5f64.powi(level as i32);
    let g = Geometry::periodic_cube(1, n, 8.0).unwrap();
    let u0 = bump(g, 0.5, 1.0, 1.0);
    let cfg = EvolveConfig::new(0.04, 4e-4 * scale).with_frame_dt(8e-3 * scale);
    nl_or_src(&u0, &cfg)
}

fn observed_order(reports: &[TransformReport], what: &str) -> Result<f64, String> {
    let order = residual_order(reports).ok_or_else(|| format!("{what}: no order estimate"))?;
    let maxima: Vec<f64> = reports.iter().map(|r| r.max_residual).collect();
    ensure!(order >= 1.0, "{what}: observed order {order:.3} (residuals {maxima:?})");
    ensure!(maxima[0] > maxima[1] && maxima[1] > maxima[2], "{what}: residuals {maxima:?} not shrinking");
    Ok(order)
}

fn criterion_5() -> Outcome {
    let mut lines = Vec::new();
    for nl in [Nonlinearity::power(2.0).unwrap(), Nonlinearity::exponential(), Nonlinearity::power_sum(4.0, 2.0).unwrap()] {
        let run = |u0: &GridField, cfg: &EvolveConfig| imex_evolve(u0, &nl, cfg).unwrap().completed().unwrap();
        let sols: Vec<SpaceTimeField> = (0..3).map(|l| solve(&run, l)).collect();
        let reports: Vec<TransformReport> = sols.iter().map(|u| quasi_scaled_residual(u, &nl, 2.0).unwrap()).collect();
        let order = observed_order(&reports, &format!("quasi-scaled {}", nl.name()))?;
        lines.push(format!("{} {order:.2}", nl.name()));
        if let Kind::Power { .. } = nl.kind() {
            // the extra term carries f′F(u) - f′F(u_λ), identically zero for powers
            let finest = &sols[2];
            let mut worst = 0.0f64;
            for f in &finest.frames {
                let fs = quasi_scale(f, &nl, 2.0).unwrap();
                for (a, b) in f.values.iter().zip(&fs.values) {
                    worst = worst.max((nl.fprime_structure(*a).unwrap() - nl.fprime_structure(*b).unwrap()).abs());
                }
            }
            ensure!(worst <= 1e-12, "power bracket term {worst:e}");
            lines.push(format!("bracket {worst:.1e}"));
        }
    }
    // transform of the model equations back to f
    let sum = Nonlinearity::power_sum(4.0, 2.0).unwrap();
    let a = sum.a_value();
    let model = ScaledPower { coef: a - 1.0, p: a / (a - 1.0) };
    let run = |u0: &GridField, cfg: &EvolveConfig| imex_evolve_source(u0, &model, cfg).unwrap().completed().unwrap();
    let reports: Vec<TransformReport> = (0..3).map(|l| general_transform_residual(&solve(&run, l), &model, &sum).unwrap()).collect();
    let order = observed_order(&reports, "general transform, power model")?;
    lines.push(format!("transform/power {order:.2}"));

    let sq = Nonlinearity::exp_square();
    let run = |u0: &GridField, cfg: &EvolveConfig| imex_evolve_source(u0, &ExpSource, cfg).unwrap().completed().unwrap();
    let reports: Vec<TransformReport> = (0..3).map(|l| general_transform_residual(&solve(&run, l), &ExpSource, &sq).unwrap()).collect();
    let order = observed_order(&reports, "general transform, exp model")?;
    lines.push(format!("transform/exp {order:.2}"));
    Ok(format!("observed orders: {}", lines.join(", ")))
}

// ---------------------------------------------------------------- 6

fn criterion_6() -> Outcome {
    let g = Geometry::periodic_cube(1, 64, 4.0).unwrap();
    let mut runs = 0;
    for nl in built_ins() {
        let u0 = bump(g.clone(), 0.2, 0.5, 0.5);
        let cfg = EvolveConfig::new(0.05, 1e-3).with_frame_dt(1e-2);
        let st = picard_monotone(&u0, &nl, &cfg).map_err(|e| format!("{}: {e}", nl.name()))?;
        ensure!(st.all_monotone(), "{}: monotone flags {:?}", nl.name(), st.monotone_flags);
        runs += 1;
    }
    let mut notes = Vec::new();
    for (nl, amp) in [(Nonlinearity::power_sum(4.0, 2.0).unwrap(), 0.8), (Nonlinearity::exp_square(), 0.5)] {
        let u0 = bump(g.clone(), 0.2, amp, 0.5);
        let cfg = EvolveConfig::new(0.05, 2e-5).with_frame_dt(1e-3);
        let sup = build_supersolution(&u0, &nl, &cfg).map_err(|e| e.to_string())?;
        ensure!(
            sup.residual.min_interior_residual >= -1e-6,
            "{}: supersolution residual {:e}",
            nl.name(),
            sup.residual.min_interior_residual
        );
        let st = picard_monotone(&u0, &nl, &cfg).map_err(|e| e.to_string())?;
        ensure!(st.all_monotone(), "{}: monotone flags {:?}", nl.name(), st.monotone_flags);
        runs += 1;
        let mut excess = f64::NEG_INFINITY;
        for (a, b) in st.solution.frames.iter().zip(&sup.field.frames) {
            for (x, y) in a.values.iter().zip(&b.values) {
                excess = excess.max(x - y);
            }
        }
        ensure!(excess <= 1e-6, "{}: Picard limit exceeds the supersolution by {excess:e}", nl.name());
        notes.push(format!("{}: residual ≥ {:.1e}, limit - super ≤ {excess:.1e}", nl.name(), sup.residual.min_interior_residual));
    }
    Ok(format!("{runs} Picard runs monotone; {}", notes.join("; ")))
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Outcome {
    let nl = Nonlinearity::power(2.0).unwrap();
    let g = Geometry::periodic_cube(1, 8, 1.0).unwrap();
    let u0 = GridField::constant(g.clone(), 1.0).unwrap();
    let cfg = EvolveConfig::new(2.0, 1e-3);
    let t_star = match imex_evolve(&u0, &nl, &cfg).map_err(|e| e.to_string())? {
        ImexOutcome::Blowup(r) => r.time_estimate,
        ImexOutcome::Completed(_) => return Err("no blow-up before T = 2".into()),
    };
    ensure!(rel(t_star, 1.0) <= 0.05, "blow-up time {t_star}");

    let mut worst = 0.0f64;
    for (p, t_final) in [(2.0, 0.5), (3.0, 0.25)] {
        let nl = Nonlinearity::power(p).unwrap();
        let cfg = EvolveConfig::new(t_final, 1e-4).with_frame_dt(0.05);
        let exact = |t: f64| (1.0 - (p - 1.0) * t).powf(-1.0 / (p - 1.0));
        let st = picard_monotone(&u0, &nl, &cfg).map_err(|e| e.to_string())?;
        let imex = imex_evolve(&u0, &nl, &cfg).map_err(|e| e.to_string())?.completed().ok_or("IMEX stopped early")?;
        for sol in [&st.solution, &imex] {
            for (t, f) in sol.times.iter().zip(&sol.frames) {
                worst = worst.max(f.values.iter().map(|v| (v - exact(*t)).abs()).fold(0.0, f64::max));
            }
        }
    }
    ensure!(worst <= 1e-3, "sup error {worst:e}");
    Ok(format!("blow-up estimate {t_star:.6} (exact 1); Picard and IMEX sup error {worst:.1e}"))
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Outcome {
    let a = weissler_a(2, 50);
    for (l, v) in a.iter().enumerate() {
        let l = l as i32 + 1;
        ensure!(*v == 2f64.powi(l + 1) - 1.0, "a_{l} = {v}");
        ensure!(weissler_a_closed(2, l) == *v, "closed form a_{l} = {}", weissler_a_closed(2, l));
    }
    let ck = weissler_ck(2).map_err(|e| e.to_string())?;
    ensure!(ck.tail_bound < 1e-12, "tail bound {:e}", ck.tail_bound);
    let oracle: f64 = (1..=200).map(|i| 0.5f64.powi(i) * (2.0 * (2f64.powi(i + 1) - 1.0)).ln()).sum();
    ensure!((ck.value - oracle).abs() <= 1e-12, "C_2 = {} oracle {oracle}", ck.value);
    let steps: Vec<f64> = ck.partial_sums.windows(2).map(|w| w[1] - w[0]).collect();
    let tail = &steps[steps.len() / 2..];
    ensure!(tail.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0), "partial sums not geometric");

    let g = Geometry::extended_cube(1, 16001, 2.5e-4, 0.0).unwrap();
    let growth = ConvexGrowth::identity(1.0).map_err(|e| e.to_string())?;
    let data = exp_singular(&growth, 6.0, &g).map_err(|e| e.to_string())?;
    let times = [1e-2, 3.16e-3, 1e-3, 3.16e-4, 1e-4, 3.16e-5, 1e-5];
    let c = weissler_certificate(&data.field, &growth, 2, &times, None).map_err(|e| e.to_string())?;
    ensure!(c.violated && c.violated_everywhere, "certificate not violated at every t: lhs {:?} rhs {:?}", c.lhs, c.rhs);
    ensure!(c.lhs_slope >= 0.9 * 3.0, "lhs slope {}", c.lhs_slope);
    Ok(format!(
        "a_l exact to l = 50; C_2 = {:.12} (tail {:.1e}); violated at all {} times, slope {:.3}",
        ck.value,
        ck.tail_bound,
        times.len(),
        c.lhs_slope
    ))
}

// ---------------------------------------------------------------- 9

/// Weissler's dichotomy for `u^p` with data in `L^{r'}_ul`, `r' = r(p-1)`.
fn weissler_expectation(n: usize, p: f64, r_lebesgue: f64) -> Regime {
    let crit = n as f64 * (p - 1.0) / 2.0;
    let eq = |a: f64, b: f64| (a - b).abs() < 1e-12;
    if r_lebesgue > crit && !eq(r_lebesgue, crit) && r_lebesgue > 1.0 {
        Regime::SubcriticalExists
    } else if eq(r_lebesgue, crit) && r_lebesgue > 1.0 && !eq(r_lebesgue, 1.0) {
        Regime::CriticalExists
    } else if (r_lebesgue >= 1.0 || eq(r_lebesgue, 1.0)) && r_lebesgue < crit && !eq(r_lebesgue, crit) {
        Regime::NonexistenceWitness
    } else {
        Regime::Indeterminate
    }
}

fn field_for(n: usize) -> GridField {
    let cells = [0, 64, 32, 16][n];
    bump(Geometry::periodic_cube(n, cells, 8.0).unwrap(), 0.5, 1.0, 1.0)
}

fn criterion_9() -> Outcome {
    let mut count = 0;
    for n in 1..=3 {
        let u0 = field_for(n);
        for p in [1.5, 2.0, 3.0] {
            let nl = Nonlinearity::power(p).unwrap();
            let crit = n as f64 * (p - 1.0) / 2.0;
            for factor in [0.5, 1.0, 1.5] {
                let r_leb = factor * crit;
                let r = r_leb / (p - 1.0);
                let v = classify(&nl, &u0, n, r, 1.0).map_err(|e| e.to_string())?;
                v.audit().map_err(|e| e.to_string())?;
                let want = weissler_expectation(n, p, r_leb);
                ensure!(v.regime == want, "u^{p}, N={n}, r'={r_leb}: got {:?}, expected {want:?}", v.regime);
                count += 1;
            }
        }
        let sq = Nonlinearity::exp_square();
        let half = n as f64 / 2.0;
        for (r, want) in
            [(half - 0.1, Regime::RapidGrowthNonexistence), (half, Regime::CriticalExists), (half + 0.1, Regime::SubcriticalExists)]
        {
            let v = classify(&sq, &u0, n, r, 1.0).map_err(|e| e.to_string())?;
            v.audit().map_err(|e| e.to_string())?;
            ensure!(v.regime == want, "e^(u^2), N={n}, r={r}: got {:?}", v.regime);
            count += 1;
        }
    }
    // u³ + u²: p > 1 + 2/N needs N ≥ 2
    let sum = Nonlinearity::power_sum(3.0, 2.0).unwrap();
    for n in [2, 3] {
        let u0 = field_for(n);
        let half = n as f64 / 2.0;
        let floor: f64 = 0.5;
        let cases =
            [(floor.max(half - 0.5), Regime::NonexistenceWitness), (half, Regime::CriticalExists), (half + 0.5, Regime::SubcriticalExists)];
        for (r, want) in cases {
            let v = classify(&sum, &u0, n, r, 1.0).map_err(|e| e.to_string())?;
            v.audit().map_err(|e| e.to_string())?;
            ensure!(v.regime == want, "u^3+u^2, N={n}, r={r}: got {:?}, expected {want:?}", v.regime);
            count += 1;
        }
    }
    Ok(format!("{count} verdicts match their statements and pass self-audit"))
}

// ---------------------------------------------------------------- 10

/// Bracket from a dense scan in `log T`, then regula falsi (Illinois).
fn scan_root(lhs: &dyn Fn(f64) -> f64, gamma: f64) -> f64 {
    let (lo_exp, hi_exp, per_decade) = (-30.0, 30.0, 2000);
    let steps = ((hi_exp - lo_exp) * per_decade as f64) as usize;
    let x_at = |k: usize| lo_exp + (hi_exp - lo_exp) * k as f64 / steps as f64;
    let k = (0..steps).find(|&k| lhs(10f64.powf(x_at(k + 1))) >= gamma).expect("no crossing");
    let h = |x: f64| lhs(10f64.powf(x)) - gamma;
    let (mut a, mut b) = (x_at(k), x_at(k + 1));
    let (mut fa, mut fb) = (h(a), h(b));
    let mut side = 0;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = h(c);
        if fc == 0.0 || (b - a).abs() < 1e-15 {
            return 10f64.powf(c);
        }
        if fc * fb > 0.0 {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    10f64.powf(0.5 * (a + b))
}

fn criterion_10() -> Outcome {
    let forms = [
        (TimeBoundForm::GeneralPower, 1, 1.0, 2.0),
        (TimeBoundForm::GeneralExp, 1, 1.0, 1.0),
        (TimeBoundForm::PowerModel, 1, 2.0, 3.0),
        (TimeBoundForm::ExpModel, 2, 1.5, 1.0),
        (TimeBoundForm::PowerSumFamily, 1, 1.0, 3.0),
        (TimeBoundForm::ExpSquareFamily, 3, 2.0, 1.0),
    ];
    let mut worst_root = 0.0f64;
    let mut worst_gamma = 0.0f64;
    for (form, n, r, exponent) in forms {
        let mut params = TimeBoundParams::new(form, n, r, 1.5, exponent);
        params.gamma = 2.0;
        let mut prev = f64::INFINITY;
        for norm in log_grid(0.1, 1e3, 13) {
            let b = existence_time_lower_bound(&params, norm).map_err(|e| format!("{form:?}: {e}"))?;
            ensure!(!b.no_root, "{form:?}: no root at norm {norm}");
            let lhs = |t: f64| params.lhs(t, norm);
            let oracle = scan_root(&lhs, params.gamma);
            worst_root = worst_root.max(rel(b.t_lower, oracle));
            worst_gamma = worst_gamma.max(rel(lhs(b.t_lower), params.gamma));
            ensure!(b.t_lower <= prev, "{form:?}: T_lower grows with the norm at {norm}");
            prev = b.t_lower;
        }
    }
    ensure!(worst_root <= 1e-10, "root vs scan {worst_root:e}");
    ensure!(worst_gamma <= 1e-9, "LHS(T_lower) vs γ {worst_gamma:e}");
    Ok(format!("6 forms x 13 norms: root vs scan {worst_root:.1e}, LHS - γ {worst_gamma:.1e}, T_lower nonincreasing"))
}

// ---------------------------------------------------------------- 11

fn criterion_11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let g = Geometry::periodic_cube(2, 24, 6.0).unwrap();
    let exps = [Exponent::Finite(1.0), Exponent::Finite(2.0), Exponent::Finite(3.5), Exponent::INF];
    let rho = 1.0;
    let ball = ball_node_count(2, rho, g.spacing) as f64 * g.cell_volume();
    for _ in 0..20 {
        let u: Vec<f64> = (0..g.len()).map(|_| rng.gen::<f64>() * 2.0 - 0.5).collect();
        let v: Vec<f64> = (0..g.len()).map(|_| rng.gen::<f64>().powi(3) * 5.0).collect();
        let c = rng.gen::<f64>() * 6.0 - 3.0;
        let fu = GridField::new(g.clone(), u.clone()).unwrap();
        let fv = GridField::new(g.clone(), v.clone()).unwrap();
        let fsum = GridField::new(g.clone(), u.iter().zip(&v).map(|(a, b)| a + b).collect()).unwrap();
        let fcu = GridField::new(g.clone(), u.iter().map(|a| c * a).collect()).unwrap();
        let fabs = GridField::new(g.clone(), v.clone()).unwrap();
        for p in exps {
            let nu = uloc_norm(&fu, UlocParams { p, rho }).unwrap();
            let nv = uloc_norm(&fv, UlocParams { p, rho }).unwrap();
            let ns = uloc_norm(&fsum, UlocParams { p, rho }).unwrap();
            let nc = uloc_norm(&fcu, UlocParams { p, rho }).unwrap();
            ensure!(rel(nc, c.abs() * nu) <= 1e-12, "homogeneity at p = {p:?}");
            ensure!(ns <= (nu + nv) * (1.0 + 1e-12), "triangle inequality at p = {p:?}");
            ensure!(nu >= 0.0, "negative norm");
            let l1 = uloc_norm(&fabs, UlocParams { p: Exponent::Finite(1.0), rho }).unwrap();
            let np = uloc_norm(&fabs, UlocParams { p, rho }).unwrap();
            ensure!(l1 <= ball.powf(1.0 - p.reciprocal()) * np * (1.0 + 1e-12), "Hölder at p = {p:?}");
        }
    }

    // smoothing: sup over t of the normalized ratio at three resolutions
    let times = log_grid(1e-3, 1.0, 13);
    let mut constants = Vec::new();
    for n in [256, 512, 1024] {
        let g = Geometry::periodic_cube(1, n, 8.0).unwrap();
        let u = bump(g.clone(), 0.0, 1.0, 0.05);
        let mut c = 0.0f64;
        for (p, q) in
            [(Exponent::Finite(1.0), Exponent::INF), (Exponent::Finite(1.0), Exponent::Finite(2.0)), (Exponent::Finite(2.0), Exponent::INF)]
        {
            for &t in &times {
                let ratio = smoothing_ratio(&u, t, p, q, 1.0, SemigroupMethod::default_for(&g, t)).map_err(|e| e.to_string())?;
                ensure!(ratio.is_finite() && ratio > 0.0, "ratio {ratio} at t = {t}");
                c = c.max(ratio);
            }
        }
        constants.push(c);
    }
    let (lo, hi) = constants.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &c| (a.min(c), b.max(c)));
    ensure!(hi <= 2.0 * lo, "smoothing constants {constants:?} vary by more than 2x");
    Ok(format!("axioms and Hölder on 20 random pairs x 4 exponents; smoothing constants {constants:.4?}"))
}

// ---------------------------------------------------------------- 12

fn bounded(name: &str, ratio: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<String, String> {
    let (train, assert_on) = disjoint_log_grids(a, b, 40);
    let fb = fit_and_assert(&ratio, &train, &assert_on, 0.05);
    ensure!(fb.constant.is_finite() && fb.holds, "{name}: fitted {} but {} on the assertion grid", fb.constant, fb.assert_max);
    Ok(format!("{name} C={:.3}", fb.constant))
}

fn criterion_12() -> Outcome {
    let mut parts = Vec::new();
    // g(s) = f(F⁻¹(s)) ≲ s^{-A} for small s
    for nl in [
        Nonlinearity::power(2.0).unwrap(),
        Nonlinearity::power_sum(4.0, 2.0).unwrap(),
        Nonlinearity::exponential(),
        Nonlinearity::exp_square(),
    ] {
        ensure!(nl.side().is_below(), "{} expected on the f'F ≤ A side", nl.name());
        let a = nl.a_value();
        let ratio = |s: f64| (a * s.ln() + nl.ln_f(nl.structure_inv(s).unwrap())).exp();
        parts.push(bounded(&format!("s^A g(s) {}", nl.name()), ratio, 1e-10, 1e-2)?);
    }
    // s·F(s)^{A-1} bounded at large s
    for nl in [Nonlinearity::power(3.0).unwrap(), Nonlinearity::power_sum(4.0, 2.0).unwrap()] {
        let a = nl.a_value();
        parts.push(bounded(&format!("s F^(A-1) {}", nl.name()), |s| s * nl.structure(s).unwrap().powf(a - 1.0), 10.0, 1e8)?);
    }
    // f′F ≤ p/(p-1) eventually, where the expansion
    // f′F = p/(p-1) + s^{q-p}(p-q)(1-(p-q))/((p-1)(2p-q-1)) + … puts it below
    for (p, q) in [(4.0, 2.0), (5.0, 2.5), (6.0, 3.0)] {
        let nl = Nonlinearity::power_sum(p, q).unwrap();
        let lim = p / (p - 1.0);
        let (_, assert_on) = disjoint_log_grids(nl.s_threshold().max(10.0), 1e6, 30);
        let worst = assert_on.iter().map(|&s| nl.fprime_structure(s).unwrap() - lim).fold(f64::NEG_INFINITY, f64::max);
        ensure!(worst <= 1e-12, "u^{p}+u^{q}: f'F exceeds p/(p-1) by {worst:e}");
    }
    let mut above = Vec::new();
    for (p, q) in [(3.0, 2.0), (3.0, 2.5)] {
        let nl = Nonlinearity::power_sum(p, q).unwrap();
        let lim = p / (p - 1.0);
        let at = |s: f64| nl.fprime_structure(s).unwrap() - lim;
        ensure!(at(100.0) > 0.0 && at(1000.0) > 0.0, "u^{p}+u^{q}: expected f'F above its limit");
        ensure!(nl.side() == Side::Above, "u^{p}+u^{q}: side {:?}", nl.side());
        above.push(format!("u^{p}+u^{q}"));
    }
    parts.push(format!("f'F below p/(p-1) for p-q > 1; above for {}", above.join(", ")));
    // F(s)^{-r} ≲ s^{r(p-1)} + s^{r(q-1)}
    for (p, q) in [(3.0, 2.0), (4.0, 2.0)] {
        let nl = Nonlinearity::power_sum(p, q).unwrap();
        for r in [1.0, 2.0] {
            let ratio = |s: f64| nl.structure(s).unwrap().powf(-r) / (s.powf(r * (p - 1.0)) + s.powf(r * (q - 1.0)));
            parts.push(bounded(&format!("F^-{r} u^{p}+u^{q}"), ratio, 1e-4, 1e4)?);
        }
    }
    let sq = Nonlinearity::exp_square();
    // F(s) ≥ e^{-s²}/(4s), s ≥ 1
    let (_, dense) = disjoint_log_grids(1.0, 1e3, 40);
    let slack = dense.iter().map(|&s| sq.ln_structure(s).unwrap() - (-s * s - (4.0 * s).ln())).fold(f64::INFINITY, f64::min);
    ensure!(slack >= 0.0, "e^(u^2) tail lower bound fails (log margin {slack})");
    parts.push(format!("F ≥ e^(-s^2)/(4s) margin {slack:.3}"));
    // F(s)^{-1} ≲ (1+s)e^{s²}
    parts.push(bounded("1/F vs (1+s)e^(s^2)", |s| (-sq.ln_structure(s).unwrap() - s * s - (1.0 + s).ln()).exp(), 1e-3, 1e3)?);
    // f′F ≤ 1 for e^{u²}
    let worst = dense.iter().chain(&log_grid(1e-3, 1.0, 40)).map(|&s| sq.fprime_structure(s).unwrap()).fold(f64::NEG_INFINITY, f64::max);
    ensure!(worst <= 1.0 + 1e-12, "e^(u^2): f'F reaches {worst}");
    parts.push(format!("max f'F for e^(u^2) {worst:.6}"));
    // h_r(|s-t|) ≤ |h_r(s) - h_r(t)|, h_r(s) = s^r e^{r s²}
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20_000 {
        let r = 1.0 + 3.0 * rng.gen::<f64>();
        let (s, t) = (3.0 * rng.gen::<f64>(), 3.0 * rng.gen::<f64>());
        let h = |x: f64| x.powf(r) * (r * x * x).exp();
        let (lhs, rhs) = (h((s - t).abs()), (h(s) - h(t)).abs());
        ensure!(lhs <= rhs * (1.0 + 1e-12) + 1e-300, "h_r fails at r={r} s={s} t={t}: {lhs} > {rhs}");
    }
    parts.push("h_r difference inequality on 20000 samples".into());
    Ok(parts.join("; "))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("structure-function oracles", criterion_1),
        ("growth constant A", criterion_2),
        ("quasi-scaling reduces to parabolic scaling", criterion_3),
        ("invariant integral under quasi-scaling", criterion_4),
        ("residual identities", criterion_5),
        ("monotone construction and supersolutions", criterion_6),
        ("ODE truth", criterion_7),
        ("iteration certificate", criterion_8),
        ("classification table", criterion_9),
        ("existence-time bounds", criterion_10),
        ("uniformly local norms", criterion_11),
        ("inequality suite", criterion_12),
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id:2} PASS [{secs:6.2}s] {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {id:2} FAIL [{secs:6.2}s] {name}: {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
