//! Tabulated sources: `(s, f, f′)` samples interpolated in log-log space.
//!
//! The interpolant is a cubic Hermite in `ln s ↦ ln f` whose slopes are the
//! sampled elasticities `s f′/f`, limited Fritsch–Carlson style so that the
//! result stays increasing. Outside the table the end elasticity continues
//! as a pure power law.

use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use super::{CustomSource, Kind, Nonlinearity, NonlinearityError, Result};

#[derive(Debug, Clone)]
pub struct LogLogSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl LogLogSpline {
    /// Samples must have strictly increasing positive `s` and positive `f`, `f′`.
    pub fn new(samples: &[(f64, f64, f64)]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(NonlinearityError::InvalidParameter("table needs at least two rows".into()));
        }
        let mut x = Vec::with_capacity(samples.len());
        let mut y = Vec::with_capacity(samples.len());
        let mut m = Vec::with_capacity(samples.len());
        for &(s, f, fp) in samples {
            if !(s > 0.0 && s.is_finite()) {
                return Err(NonlinearityError::InvalidParameter(format!("table abscissa {s} must be positive")));
            }
            if !(f > 0.0) {
                return Err(NonlinearityError::NonPositiveSource { u: s, value: f });
            }
            if !(fp > 0.0) {
                return Err(NonlinearityError::InvalidParameter(format!("table derivative at s = {s} must be positive")));
            }
            x.push(s.ln());
            y.push(f.ln());
            m.push(s * fp / f);
        }
        for k in 1..x.len() {
            if !(x[k] > x[k - 1]) {
                return Err(NonlinearityError::InvalidParameter("table abscissae must increase".into()));
            }
            if !(y[k] > y[k - 1]) {
                return Err(NonlinearityError::InvalidParameter("tabulated f must increase".into()));
            }
        }
        // Fritsch–Carlson limiter on each interval
        for k in 0..x.len() - 1 {
            let delta = (y[k + 1] - y[k]) / (x[k + 1] - x[k]);
            let a = m[k] / delta;
            let b = m[k + 1] / delta;
            let r2 = a * a + b * b;
            if r2 > 9.0 {
                let tau = 3.0 / r2.sqrt();
                m[k] = tau * a * delta;
                m[k + 1] = tau * b * delta;
            }
        }
        Ok(LogLogSpline { x, y, m })
    }

    /// `(ln f, d ln f / d ln s)` at `ln s = z`.
    fn eval(&self, z: f64) -> (f64, f64) {
        let n = self.x.len();
        if z <= self.x[0] {
            return (self.y[0] + self.m[0] * (z - self.x[0]), self.m[0]);
        }
        if z >= self.x[n - 1] {
            return (self.y[n - 1] + self.m[n - 1] * (z - self.x[n - 1]), self.m[n - 1]);
        }
        let k = match self.x.binary_search_by(|v| v.partial_cmp(&z).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i - 1,
        };
        let h = self.x[k + 1] - self.x[k];
        let t = (z - self.x[k]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let v = h00 * self.y[k] + h10 * h * self.m[k] + h01 * self.y[k + 1] + h11 * h * self.m[k + 1];
        let d00 = (6.0 * t2 - 6.0 * t) / h;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = (-6.0 * t2 + 6.0 * t) / h;
        let d11 = 3.0 * t2 - 2.0 * t;
        let d = d00 * self.y[k] + d10 * self.m[k] + d01 * self.y[k + 1] + d11 * self.m[k + 1];
        (v, d)
    }

    pub fn f(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        self.eval(s.ln()).0.exp()
    }

    pub fn f_prime(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let (lf, el) = self.eval(s.ln());
        lf.exp() * el / s
    }
}

/// Builds a custom nonlinearity from the spline.
pub fn from_samples(label: impl Into<String>, samples: &[(f64, f64, f64)]) -> Result<Nonlinearity> {
    let spline = Arc::new(LogLogSpline::new(samples)?);
    let (a, b) = (spline.clone(), spline);
    Nonlinearity::new(Kind::Custom(CustomSource {
        label: label.into(),
        f: Arc::new(move |s| a.f(s)),
        f_prime: Arc::new(move |s| b.f_prime(s)),
        domain_floor: 0.0,
    }))
}

/// Parses `s,f,f_prime` rows; a non-numeric first row is taken as a header.
pub fn parse_table(text: &str) -> Result<Vec<(f64, f64, f64)>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Option<Vec<f64>> = cols.iter().map(|c| c.parse::<f64>().ok()).collect();
        match parsed {
            Some(v) if v.len() == 3 => rows.push((v[0], v[1], v[2])),
            None if i == 0 => continue,
            _ => {
                return Err(NonlinearityError::Parse(format!("table line {}: '{line}'", i + 1)));
            }
        }
    }
    Ok(rows)
}

pub fn load_table(path: &Path) -> Result<Nonlinearity> {
    let mut text = String::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| NonlinearityError::Parse(format!("{}: {e}", path.display())))?;
    let label = path.file_stem().and_then(|s| s.to_str()).unwrap_or("table").to_string();
    from_samples(label, &parse_table(&text)?)
}
