use serde::{Deserialize, Serialize};

use super::{frame, outside_value, EvolveError, Propagators, Result};
use crate::grid::uloc::{uloc_norm, UlocParams};
use crate::grid::GridField;
use crate::heat::SemigroupMethod;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractionConfig {
    pub p: f64,
    pub r: f64,
    pub rho: f64,
    /// Radius `M` of the weighted ball.
    pub m_bound: f64,
    #[serde(alias = "T")]
    pub t_final: f64,
    #[serde(default = "default_steps")]
    pub n_steps: usize,
    /// Fixed-point sweeps before the pair test.
    #[serde(default = "default_sweeps")]
    pub sweeps: usize,
    /// Relative sizes of the perturbations.
    #[serde(default = "default_eps")]
    pub perturbations: Vec<f64>,
    #[serde(default)]
    pub method: Option<SemigroupMethod>,
}

fn default_steps() -> usize {
    64
}

fn default_sweeps() -> usize {
    8
}

fn default_eps() -> Vec<f64> {
    vec![1e-3, 1e-2, 1e-1]
}

impl ContractionConfig {
    pub fn new(p: f64, r: f64, rho: f64, m_bound: f64, t_final: f64) -> Self {
        ContractionConfig {
            p,
            r,
            rho,
            m_bound,
            t_final,
            n_steps: default_steps(),
            sweeps: default_sweeps(),
            perturbations: default_eps(),
            method: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Subcritical,
    Critical,
}

/// `t^σ ‖u(t)‖_{q,ul,ρ}` along the run (critical case).
#[derive(Debug, Clone, Serialize)]
pub struct CriticalDecay {
    pub sigma: f64,
    pub q: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Smaller at the earliest positive time than at the latest.
    pub decays_toward_zero: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionReport {
    pub regime: Regime,
    pub alpha: f64,
    pub alpha_p: f64,
    /// `sup_t ‖Φu‖_{r,ul,ρ}` for the last sweep.
    pub sup_r_norm: f64,
    /// Ball radius used for it: `2‖u₀‖_{r,ul,ρ}`.
    pub r_bound: f64,
    /// `sup_t t^α ‖Φu‖_{pr,ul,ρ}`.
    pub sup_weighted_norm: f64,
    pub in_r_ball: bool,
    pub in_m_ball: bool,
    /// Largest `d(Φu, Φv)/d(u, v)` over the perturbed pairs.
    pub factor: f64,
    pub factors: Vec<f64>,
    pub critical_decay: Option<CriticalDecay>,
}

type Traj = (Vec<Vec<f64>>, Vec<Option<f64>>);

struct Probe<'a> {
    u0: &'a GridField,
    cfg: &'a ContractionConfig,
    dt: f64,
    alpha: f64,
    props: Propagators,
}

impl Probe<'_> {
    fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.cfg.n_steps).map(move |j| j as f64 * self.dt)
    }

    fn heat(&mut self, data: &GridField) -> Result<Traj> {
        let mut cur = data.values.clone();
        let out = outside_value(&data.geometry);
        let mut vals = vec![cur.clone()];
        for _ in 0..self.cfg.n_steps {
            self.props.apply(self.dt, &mut cur, out)?;
            vals.push(cur.clone());
        }
        Ok((vals, vec![out; self.cfg.n_steps + 1]))
    }

    /// `Φ(u) = e^{tΔ}u₀ + ∫₀ᵗ e^{(t-s)Δ}|u|^{p-1}u ds`, trapezoid in time.
    fn phi(&mut self, heat: &Traj, u: &Traj) -> Result<Traj> {
        let p = self.cfg.p;
        let nl = |v: f64| v.abs().powf(p - 1.0) * v;
        let dt = self.dt;
        let mut d = vec![0.0; heat.0[0].len()];
        let mut d_out = heat.1[0].map(|_| 0.0);
        let mut vals = vec![heat.0[0].clone()];
        let mut outs = vec![heat.1[0]];
        for j in 0..self.cfg.n_steps {
            d.iter_mut().zip(&u.0[j]).for_each(|(a, v)| *a += 0.5 * dt * nl(*v));
            d_out = d_out.zip(u.1[j]).map(|(a, v)| a + 0.5 * dt * nl(v));
            self.props.apply(dt, &mut d, d_out)?;
            d.iter_mut().zip(&u.0[j + 1]).for_each(|(a, v)| *a += 0.5 * dt * nl(*v));
            d_out = d_out.zip(u.1[j + 1]).map(|(a, v)| a + 0.5 * dt * nl(v));
            vals.push(heat.0[j + 1].iter().zip(&d).map(|(h, x)| h + x).collect());
            outs.push(heat.1[j + 1].zip(d_out).map(|(h, x)| h + x));
        }
        Ok((vals, outs))
    }

    fn norm(&self, values: &[f64], out: Option<f64>, q: f64) -> Result<f64> {
        let f = frame(&self.u0.geometry, values.to_vec(), out);
        Ok(uloc_norm(&f, UlocParams::new(q, self.cfg.rho))?)
    }

    /// `sup_{t>0} t^a ‖u(t)‖_{q,ul,ρ}`.
    fn weighted(&self, u: &Traj, q: f64, a: f64) -> Result<f64> {
        let mut best = 0.0f64;
        for (j, t) in self.times().enumerate().skip(1) {
            best = best.max(t.powf(a) * self.norm(&u.0[j], u.1[j], q)?);
        }
        Ok(best)
    }

    fn metric(&self, u: &Traj, v: &Traj) -> Result<f64> {
        let diff: Traj = (
            u.0.iter().zip(&v.0).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect()).collect(),
            u.1.iter().zip(&v.1).map(|(a, b)| a.zip(*b).map(|(x, y)| x - y)).collect(),
        );
        self.weighted(&diff, self.cfg.p * self.cfg.r, self.alpha)
    }
}

/// Runs the Duhamel map at grid level: ball membership of its iterates and
/// the empirical Lipschitz factor on perturbed pairs.
pub fn contraction_probe(u0: &GridField, cfg: &ContractionConfig) -> Result<ContractionReport> {
    let (p, r) = (cfg.p, cfg.r);
    if !(p > 1.0 && r >= 1.0 && cfg.rho > 0.0 && cfg.t_final > 0.0 && cfg.m_bound > 0.0 && cfg.n_steps >= 2) {
        return Err(EvolveError::BadConfig(format!("need p > 1, r ≥ 1, positive rho, M, T (p = {p}, r = {r})")));
    }
    let n = u0.dim() as f64;
    let critical = 0.5 * n * (p - 1.0);
    let regime = if (r - critical).abs() <= 1e-12 * critical.max(1.0) {
        if r <= 1.0 {
            return Err(EvolveError::CriticalExponent { r });
        }
        Regime::Critical
    } else if r < critical {
        return Err(EvolveError::Supercritical { r, critical });
    } else {
        Regime::Subcritical
    };
    let alpha = 0.5 * n * (1.0 / r - 1.0 / (p * r));
    let dt = cfg.t_final / cfg.n_steps as f64;
    let mut probe = Probe { u0, cfg, dt, alpha, props: Propagators::new(&u0.geometry, cfg.method) };

    let heat = probe.heat(u0)?;
    let mut u = heat.clone();
    for _ in 0..cfg.sweeps {
        u = probe.phi(&heat, &u)?;
    }
    let sup_r_norm = (0..=cfg.n_steps).map(|j| probe.norm(&u.0[j], u.1[j], r)).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
    let r_bound = 2.0 * probe.norm(&u0.values, outside_value(&u0.geometry), r)?;
    let sup_weighted_norm = probe.weighted(&u, p * r, alpha)?;

    // directions: the iterate itself and a localized bump carried by the heat flow
    let amp = u0.max().abs().max(1.0);
    let bump =
        GridField::from_fn(u0.geometry.with_extension(0.0), |x| amp * (-x.iter().map(|c| c * c).sum::<f64>() / (cfg.rho * cfg.rho)).exp())?;
    let bump_heat = probe.heat(&bump)?;
    let phi_u = probe.phi(&heat, &u)?;
    let mut factors = Vec::new();
    for dir in [&u, &bump_heat] {
        for &eps in &cfg.perturbations {
            let v: Traj = (
                u.0.iter().zip(&dir.0).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + eps * y).collect()).collect(),
                u.1.iter().zip(&dir.1).map(|(a, b)| a.map(|x| x + eps * b.unwrap_or(0.0))).collect(),
            );
            let den = probe.metric(&u, &v)?;
            if den > 0.0 {
                let phi_v = probe.phi(&heat, &v)?;
                factors.push(probe.metric(&phi_u, &phi_v)? / den);
            }
        }
    }
    let factor = factors.iter().copied().fold(0.0, f64::max);

    let critical_decay = match regime {
        Regime::Critical => {
            let q = 0.5 * (p.max(r) + p * r);
            let sigma = 0.5 * n * (1.0 / r - 1.0 / q);
            let times: Vec<f64> = probe.times().skip(1).collect();
            let values =
                (1..=cfg.n_steps).map(|j| Ok(times[j - 1].powf(sigma) * probe.norm(&u.0[j], u.1[j], q)?)).collect::<Result<Vec<_>>>()?;
            let decays_toward_zero = values[0] < *values.last().unwrap();
            Some(CriticalDecay { sigma, q, times, values, decays_toward_zero })
        }
        Regime::Subcritical => None,
    };

    Ok(ContractionReport {
        regime,
        alpha,
        alpha_p: alpha * p,
        sup_r_norm,
        r_bound,
        sup_weighted_norm,
        in_r_ball: sup_r_norm <= r_bound,
        in_m_ball: sup_weighted_norm <= cfg.m_bound,
        factor,
        factors,
        critical_decay,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Geometry;

    fn data(c: f64) -> GridField {
        GridField::from_fn(Geometry::periodic_cube(1, 64, 8.0).unwrap(), |x| c * (1.0 + 0.5 * (x[0]).cos())).unwrap()
    }

    #[test]
    fn exponent_arithmetic() {
        let r = contraction_probe(&data(0.1), &ContractionConfig::new(2.0, 2.0, 1.0, 1.0, 0.1)).unwrap();
        assert!((r.alpha - 0.125).abs() < 1e-15);
        assert!((r.alpha_p - 0.25).abs() < 1e-15);
        assert_eq!(r.regime, Regime::Subcritical);
    }

    #[test]
    fn small_data_contracts() {
        let r = contraction_probe(&data(0.1), &ContractionConfig::new(2.0, 2.0, 1.0, 1.0, 0.5)).unwrap();
        assert!(r.factor < 1.0, "{}", r.factor);
        assert!(r.in_m_ball && r.in_r_ball);
    }

    #[test]
    fn critical_with_r_one_is_rejected() {
        let e = contraction_probe(&data(0.1), &ContractionConfig::new(3.0, 1.0, 1.0, 1.0, 0.1));
        assert!(matches!(e, Err(EvolveError::CriticalExponent { .. })));
    }

    #[test]
    fn supercritical_is_rejected() {
        let e = contraction_probe(&data(0.1), &ContractionConfig::new(5.0, 1.5, 1.0, 1.0, 0.1));
        assert!(matches!(e, Err(EvolveError::Supercritical { .. })));
    }
}
