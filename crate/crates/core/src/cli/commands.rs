use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use super::{Cell, CliError, Command, Scenario, SolverKind, Table};
use crate::classify::{classify_levels, subsampled_levels, threshold_report, Regime};
use crate::evolve::{build_supersolution, contraction_probe, imex_evolve, picard_monotone, weissler_certificate, ImexOutcome};
use crate::grid::io;
use crate::grid::uloc::{classification_integral, uloc_norm, Exponent, UlocParams};
use crate::grid::{Geometry, GridField};
use crate::singular::SingularData;
use crate::transforms::{invariant_integral, quasi_scale, quasi_scaled_residual, SpaceTimeField};

use super::scenario::DataSpec;

pub struct CommandOutput {
    pub json: Value,
    pub table: Table,
    /// A verdict came out `Indeterminate`.
    pub indeterminate: bool,
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Io(e.to_string()))
}

pub fn run_command(command: Command, s: &Scenario, out: &Path) -> Result<CommandOutput, CliError> {
    let geometry = s.grid.geometry()?;
    let (u0, singular) = s.build_data(&geometry)?;
    if s.output.dump_fields {
        fs::create_dir_all(out)?;
        io::save(&u0, &out.join("data.grid"), s.output.payload)?;
    }
    match command {
        Command::Classify => classify_cmd(s, &geometry, &u0),
        Command::Simulate => simulate_cmd(s, &u0, out),
        Command::Certify => certify_cmd(s, &u0, singular.as_ref()),
        Command::TransformCheck => transform_cmd(s, &u0),
        Command::Norms => norms_cmd(s, &u0),
        Command::Contract => contract_cmd(s, &u0),
        Command::Sweep => Err(CliError::Config("nested sweeps are not supported".into())),
    }
}

fn classify_cmd(s: &Scenario, geometry: &Geometry, u0: &GridField) -> Result<CommandOutput, CliError> {
    let nl = s.nonlinearity()?;
    let n = s.dimension()?;
    let r = s.require_r()?;
    // singular profiles are rebuilt per level so their cap follows h
    let levels = match s.data {
        DataSpec::ExpSingular { .. } | DataSpec::PowerSingular { .. } => {
            let g1 = geometry.refined();
            let g2 = g1.refined();
            vec![u0.clone(), s.build_data(&g1)?.0, s.build_data(&g2)?.0]
        }
        _ => subsampled_levels(u0),
    };
    let v = classify_levels(&nl, &levels, n, r, s.rho, s.gamma)?;
    let mut table = Table::new(&["nonlinearity", "N", "r", "rho", "A", "side", "integral", "regime", "theorem", "t_lower"]);
    table.push(vec![
        nl.name().into(),
        n.into(),
        r.into(),
        s.rho.into(),
        nl.a_value().into(),
        format!("{:?}", v.inputs.side).into(),
        integral_label(&v.inputs.integral).into(),
        snake(&v.regime).into(),
        snake(&v.theorem).into(),
        v.time_bound.map_or(Cell::Text(String::new()), |b| b.t_lower.into()),
    ]);
    let indeterminate = v.regime == Regime::Indeterminate;
    let json = json!({ "verdict": to_json(&v)?, "thresholds": to_json(&threshold_report(&nl, n))? });
    Ok(CommandOutput { json, table, indeterminate })
}

fn integral_label(i: &crate::classify::IntegralStatus) -> String {
    use crate::classify::IntegralStatus::*;
    match i {
        Finite { value } => format!("finite:{value:.16e}"),
        Diverging { logarithmic: true, .. } => "diverging:log".into(),
        Diverging { rate, .. } => format!("diverging:{rate:.6}"),
        Ambiguous { .. } => "ambiguous".into(),
    }
}

fn snake<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|j| j.as_str().map(String::from)).unwrap_or_default()
}

fn frame_table(st: &SpaceTimeField) -> Table {
    let mut t = Table::new(&["t", "max_u", "min_u"]);
    for (time, f) in st.times.iter().zip(&st.frames) {
        t.push(vec![(*time).into(), f.max().into(), f.min().into()]);
    }
    t
}

fn dump_frames(s: &Scenario, st: &SpaceTimeField, out: &Path) -> Result<(), CliError> {
    if !s.output.dump_fields {
        return Ok(());
    }
    let dir = out.join("frames");
    fs::create_dir_all(&dir)?;
    for (k, f) in st.frames.iter().enumerate().step_by(s.output.frame_stride) {
        io::save(f, &dir.join(format!("frame_{k:05}.grid")), s.output.payload)?;
    }
    Ok(())
}

fn simulate_cmd(s: &Scenario, u0: &GridField, out: &Path) -> Result<CommandOutput, CliError> {
    let nl = s.nonlinearity()?;
    let cfg = s.solver.as_ref().ok_or_else(|| CliError::Config("simulate needs a solver block".into()))?;
    let empty = || Table::new(&["t", "max_u", "min_u"]);
    let (json, table) = match s.solver_kind {
        SolverKind::Imex => match imex_evolve(u0, &nl, cfg)? {
            ImexOutcome::Completed(st) => {
                dump_frames(s, &st, out)?;
                (json!({ "solver": "imex", "outcome": "completed", "final_max": st.frames.last().map(|f| f.max()) }), frame_table(&st))
            }
            ImexOutcome::Blowup(r) => {
                let table = r.frames.as_ref().map_or_else(empty, frame_table);
                if let Some(st) = &r.frames {
                    dump_frames(s, st, out)?;
                }
                (json!({ "solver": "imex", "outcome": "blowup", "report": to_json(&r)?, "evidence": "numerical, at this h and dt" }), table)
            }
        },
        SolverKind::Picard => {
            let st = picard_monotone(u0, &nl, cfg)?;
            dump_frames(s, &st.solution, out)?;
            let json = json!({
                "solver": "picard",
                "status": snake(&st.status),
                "iterations": st.iterations(),
                "monotone_flags": st.monotone_flags,
                "all_monotone": st.all_monotone(),
                "gaps": st.gaps,
                "sup_gap": st.sup_gap,
            });
            (json, frame_table(&st.solution))
        }
        SolverKind::Supersolution => {
            let r = build_supersolution(u0, &nl, cfg)?;
            dump_frames(s, &r.field, out)?;
            (json!({ "solver": "supersolution", "report": to_json(&r)? }), frame_table(&r.field))
        }
    };
    Ok(CommandOutput { json, table, indeterminate: false })
}

fn certify_cmd(s: &Scenario, u0: &GridField, singular: Option<&SingularData>) -> Result<CommandOutput, CliError> {
    let spec = s.certificate.as_ref().ok_or_else(|| CliError::Config("certify needs a certificate block".into()))?;
    let g = s.growth()?;
    let c = weissler_certificate(u0, &g, spec.k, &spec.times, spec.method)?;
    let mut table = Table::new(&["t", "lhs", "rhs", "violated"]);
    for i in 0..c.times.len() {
        table.push(vec![c.times[i].into(), c.lhs[i].into(), c.rhs[i].into(), (c.lhs[i] > c.rhs[i]).into()]);
    }
    let json = json!({ "certificate": to_json(&c)?, "provenance": singular.map(|d| to_json(&d.provenance)).transpose()? });
    Ok(CommandOutput { json, table, indeterminate: false })
}

fn transform_cmd(s: &Scenario, u0: &GridField) -> Result<CommandOutput, CliError> {
    let nl = s.nonlinearity()?;
    let n = s.dimension()?;
    let spec = s.transform.as_ref().ok_or_else(|| CliError::Config("transform-check needs a transform block".into()))?;
    let i0 = invariant_integral(u0, &nl, n)?;
    let evolved = match &s.solver {
        Some(cfg) => imex_evolve(u0, &nl, cfg)?.completed(),
        None => None,
    };
    let mut table = Table::new(&["lambda", "invariant_0", "invariant_lambda", "relative_drift", "max_residual", "max_interior_residual"]);
    let mut rows = Vec::new();
    for &lambda in &spec.lambdas {
        let ul = quasi_scale(u0, &nl, lambda)?;
        let il = invariant_integral(&ul, &nl, n)?;
        let drift = (il - i0).abs() / i0.abs();
        let res = evolved.as_ref().map(|st| quasi_scaled_residual(st, &nl, lambda)).transpose()?;
        let cell = |v: Option<f64>| v.map_or(Cell::Text(String::new()), Cell::Num);
        table.push(vec![
            lambda.into(),
            i0.into(),
            il.into(),
            drift.into(),
            cell(res.as_ref().map(|r| r.max_residual)),
            cell(res.as_ref().map(|r| r.max_interior_residual)),
        ]);
        rows.push(json!({ "lambda": lambda, "invariant": il, "relative_drift": drift, "residual": res.map(|r| to_json(&r)).transpose()? }));
    }
    Ok(CommandOutput { json: json!({ "invariant_0": i0, "lambdas": rows }), table, indeterminate: false })
}

fn norms_cmd(s: &Scenario, u0: &GridField) -> Result<CommandOutput, CliError> {
    let ps = s.norms.clone().unwrap_or_else(|| vec![Exponent::Finite(1.0), Exponent::Finite(2.0), Exponent::INF]);
    let mut table = Table::new(&["p", "rho", "norm"]);
    let mut rows = Vec::new();
    for p in ps {
        let v = uloc_norm(u0, UlocParams { p, rho: s.rho })?;
        let label = match p {
            Exponent::Finite(x) => Cell::Num(x),
            Exponent::Infinite(_) => Cell::Text("inf".into()),
        };
        table.push(vec![label, s.rho.into(), v.into()]);
        rows.push(json!({ "p": p, "norm": v }));
    }
    let integral = match s.r {
        Some(r) => Some(to_json(&classification_integral(u0, &s.nonlinearity()?, r, s.rho)?)?),
        None => None,
    };
    Ok(CommandOutput { json: json!({ "rho": s.rho, "norms": rows, "classification_integral": integral }), table, indeterminate: false })
}

fn contract_cmd(s: &Scenario, u0: &GridField) -> Result<CommandOutput, CliError> {
    let cfg = s.contraction.as_ref().ok_or_else(|| CliError::Config("contract needs a contraction block".into()))?;
    let r = contraction_probe(u0, cfg)?;
    let mut table = Table::new(&["p", "r", "T", "alpha", "alpha_p", "factor", "in_r_ball", "in_m_ball"]);
    table.push(vec![
        cfg.p.into(),
        cfg.r.into(),
        cfg.t_final.into(),
        r.alpha.into(),
        r.alpha_p.into(),
        r.factor.into(),
        r.in_r_ball.into(),
        r.in_m_ball.into(),
    ]);
    Ok(CommandOutput { json: json!({ "contraction": to_json(&r)? }), table, indeterminate: false })
}
