use serde::Serialize;

use super::{frame, imex_evolve_source, outside_value, EvolveConfig, EvolveError, ImexOutcome, Result};
use crate::grid::GridField;
use crate::nonlinearity::{ExpSource, Nonlinearity, ScaledPower, Source};
use crate::transforms::{cole_hopf_u_value, log_transform_inv_value, pde_residual, SpaceTimeField, TransformReport};

/// Allowed negative part of `∂t ū - Δū - f(ū)`.
pub const TOL_RESIDUAL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct SupersolutionReport {
    pub a: f64,
    /// `"power"` (A > 1) or `"log"` (A = 1).
    pub branch: String,
    /// Threshold `s₁` below which the data are lifted.
    pub floor: f64,
    pub residual: TransformReport,
    /// Interior residual ≥ `-TOL_RESIDUAL` everywhere.
    pub holds: bool,
    #[serde(skip)]
    pub field: SpaceTimeField,
    /// The auxiliary solution `v` (or `w`).
    #[serde(skip)]
    pub auxiliary: SpaceTimeField,
}

/// Supersolution `ū` from the power (`v = F(u)^{-(A-1)}`) or log
/// (`w = -log F(u)`) transform of `max{u₀, s₁}`, evolved by the model
/// equation and mapped back.
pub fn build_supersolution(u0: &GridField, nl: &Nonlinearity, cfg: &EvolveConfig) -> Result<SupersolutionReport> {
    if !nl.side().is_below() {
        return Err(EvolveError::NotApplicable(format!("{} has side {:?}, needs f'F ≤ A eventually", nl.name(), nl.side())));
    }
    cfg.validate(u0)?;
    let a = nl.a_value();
    let floor = nl.s_threshold().max(nl.domain_floor());
    let g = &u0.geometry;
    let log_branch = nl.is_exponential_type();
    // forward map in log form, clamped at the floor
    let lnf_floor = nl.ln_structure(floor).unwrap_or(f64::INFINITY);
    let forward = |s: f64| -> Result<f64> {
        let lf = if s > floor { nl.ln_structure(s)? } else { lnf_floor };
        Ok(if log_branch { -lf } else { (-(a - 1.0) * lf).exp() })
    };
    let back = |x: f64| -> Result<f64> {
        if log_branch {
            Ok(log_transform_inv_value(nl, x)?)
        } else if x <= 0.0 {
            Ok(nl.domain_floor())
        } else {
            Ok(cole_hopf_u_value(nl, a, x)?)
        }
    };

    let vals = u0.values.iter().map(|&s| forward(s)).collect::<Result<Vec<_>>>()?;
    let out = outside_value(g).map(forward).transpose()?;
    let v0 = frame(g, vals, out);
    let mut aux_cfg = cfg.clone();
    aux_cfg.blowup_cap = forward(cfg.blowup_cap)?;
    let power = ScaledPower { coef: a - 1.0, p: a / (a - 1.0) };
    let src: &dyn Source = if log_branch { &ExpSource } else { &power };
    let aux = match imex_evolve_source(&v0, src, &aux_cfg)? {
        ImexOutcome::Completed(s) => s,
        ImexOutcome::Blowup(r) => return Err(EvolveError::AuxiliaryBlowup { time: r.time_estimate }),
    };

    let frames = aux
        .frames
        .iter()
        .map(|fr| {
            let vals = fr.values.iter().map(|&x| back(x)).collect::<Result<Vec<_>>>()?;
            let out = outside_value(&fr.geometry).map(back).transpose()?;
            Ok(frame(g, vals, out))
        })
        .collect::<Result<Vec<_>>>()?;
    let field = SpaceTimeField::new(aux.times.clone(), frames)?;
    let residual = pde_residual(&field, nl)?;
    let holds = residual.min_interior_residual >= -TOL_RESIDUAL;
    Ok(SupersolutionReport { a, branch: if log_branch { "log" } else { "power" }.into(), floor, residual, holds, field, auxiliary: aux })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Geometry;

    fn bump(n: usize, amp: f64) -> GridField {
        GridField::from_fn(Geometry::periodic_cube(1, n, 4.0).unwrap(), |x| 0.2 + amp * (-(4.0 * x[0] * x[0])).exp()).unwrap()
    }

    #[test]
    fn power_branch_reproduces_the_solution() {
        let nl = Nonlinearity::power(2.0).unwrap();
        let cfg = EvolveConfig::new(0.1, 1e-4).with_frame_dt(1e-2);
        let r = build_supersolution(&bump(64, 0.5), &nl, &cfg).unwrap();
        assert_eq!(r.branch, "power");
        let plain = imex_evolve_source(&bump(64, 0.5), &nl, &cfg).unwrap().completed().unwrap();
        let last = (r.field.frames.last().unwrap(), plain.frames.last().unwrap());
        let d = last.0.values.iter().zip(&last.1.values).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(d < 1e-9, "{d}");
    }

    #[test]
    fn above_side_is_rejected() {
        let nl = Nonlinearity::power_sum(3.0, 2.0).unwrap();
        let cfg = EvolveConfig::new(0.1, 1e-3);
        assert!(matches!(build_supersolution(&bump(16, 0.5), &nl, &cfg), Err(EvolveError::NotApplicable(_))));
    }

    #[test]
    fn power_sum_residual_nonnegative() {
        let nl = Nonlinearity::power_sum(4.0, 2.0).unwrap();
        let cfg = EvolveConfig::new(0.05, 2e-5).with_frame_dt(1e-3);
        let r = build_supersolution(&bump(64, 0.8), &nl, &cfg).unwrap();
        assert!(r.holds, "{}", r.residual.min_interior_residual);
    }

    #[test]
    fn exp_square_log_branch() {
        let nl = Nonlinearity::exp_square();
        let cfg = EvolveConfig::new(0.05, 2e-5).with_frame_dt(1e-3);
        let r = build_supersolution(&bump(64, 0.5), &nl, &cfg).unwrap();
        assert_eq!(r.branch, "log");
        assert!(r.holds, "{}", r.residual.min_interior_residual);
    }
}
