use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::evolve::{ContractionConfig, EvolveConfig};
use crate::grid::uloc::Exponent;
use crate::grid::{io, Geometry, GridField};
use crate::heat::SemigroupMethod;
use crate::nonlinearity::{custom, Nonlinearity, NonlinearityError};
use crate::singular::{exp_singular, power_singular, ConvexGrowth, SingularData};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    /// `[-side/2, side/2)^dim`, `n` nodes per axis.
    Periodic { dim: usize, n: usize, side: f64 },
    /// `n` nodes per axis at spacing `h`, centred, constant `value` outside.
    Extended {
        dim: usize,
        n: usize,
        h: f64,
        #[serde(default)]
        value: f64,
    },
}

impl GridSpec {
    pub fn geometry(&self) -> Result<Geometry, CliError> {
        Ok(match *self {
            GridSpec::Periodic { dim, n, side } => Geometry::periodic_cube(dim, n, side)?,
            GridSpec::Extended { dim, n, h, value } => Geometry::extended_cube(dim, n, h, value)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GrowthSpec {
    #[default]
    Identity,
    Square,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSpec {
    Constant {
        value: f64,
    },
    /// `base + amplitude·exp(-|x|²/width²)`.
    Bump {
        amplitude: f64,
        #[serde(default = "one")]
        width: f64,
        #[serde(default)]
        base: f64,
    },
    /// `base + amplitude·U(0,1)` per node from the scenario seed.
    Noise {
        amplitude: f64,
        #[serde(default)]
        base: f64,
    },
    File {
        path: PathBuf,
    },
    ExpSingular {
        #[serde(default)]
        growth: GrowthSpec,
        alpha: f64,
        #[serde(default = "one")]
        s0: f64,
    },
    PowerSingular {
        r: f64,
        #[serde(default)]
        kappa: Option<f64>,
    },
}

fn one() -> f64 {
    1.0
}

impl GrowthSpec {
    pub fn build(self, s0: f64) -> Result<ConvexGrowth, CliError> {
        Ok(match self {
            GrowthSpec::Identity => ConvexGrowth::identity(s0)?,
            GrowthSpec::Square => ConvexGrowth::square(s0)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    #[default]
    Imex,
    Picard,
    Supersolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateSpec {
    #[serde(default = "two")]
    pub k: u32,
    pub times: Vec<f64>,
    #[serde(default)]
    pub method: Option<SemigroupMethod>,
}

fn two() -> u32 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub lambdas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Command run at every point.
    pub command: String,
    /// Scenario keys (dotted paths) and the values they take; the points are
    /// the Cartesian product.
    pub axes: Vec<(String, Vec<serde_json::Value>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    /// Write the data (and solver frames) as grid files.
    #[serde(default)]
    pub dump_fields: bool,
    /// Keep every `frame_stride`-th frame in dumps.
    #[serde(default = "one_usize")]
    pub frame_stride: usize,
    #[serde(default = "payload_default")]
    pub payload: io::Payload,
}

fn one_usize() -> usize {
    1
}

fn payload_default() -> io::Payload {
    io::Payload::F64le
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dump_fields: false, frame_stride: 1, payload: io::Payload::F64le }
    }
}

/// One run, as read from a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub nonlinearity: String,
    pub grid: GridSpec,
    pub data: DataSpec,
    /// `N`; the grid dimension when absent.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default = "one")]
    pub rho: f64,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default)]
    pub solver: Option<EvolveConfig>,
    #[serde(default)]
    pub solver_kind: SolverKind,
    #[serde(default)]
    pub certificate: Option<CertificateSpec>,
    #[serde(default)]
    pub transform: Option<TransformSpec>,
    #[serde(default)]
    pub contraction: Option<ContractionConfig>,
    /// Exponents for `norms` (numbers or `"inf"`).
    #[serde(default)]
    pub norms: Option<Vec<Exponent>>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!("schema_version {} (expected {SCHEMA_VERSION})", self.schema_version)));
        }
        if !(self.rho > 0.0 && self.gamma > 0.0) {
            return Err(CliError::Config("rho and gamma must be positive".into()));
        }
        if let Some(r) = self.r {
            if !(r > 0.0 && r.is_finite()) {
                return Err(CliError::Config(format!("r = {r} must be positive")));
            }
        }
        if let DataSpec::File { path } = &self.data {
            if !path.exists() {
                return Err(CliError::Config(format!("data file {} does not exist", path.display())));
            }
        }
        if self.output.frame_stride == 0 {
            return Err(CliError::Config("frame_stride must be at least 1".into()));
        }
        self.grid.geometry()?;
        Ok(())
    }

    /// Built-in names, or `table(path.csv)` for `s,f,f_prime` samples.
    pub fn nonlinearity(&self) -> Result<Nonlinearity, CliError> {
        let spec = self.nonlinearity.trim();
        if let Some(path) = spec.strip_prefix("table(").and_then(|r| r.strip_suffix(')')) {
            return custom::load_table(Path::new(path.trim())).map_err(|e| match e {
                NonlinearityError::Parse(_) | NonlinearityError::InvalidParameter(_) => CliError::Config(e.to_string()),
                e => e.into(),
            });
        }
        spec.parse::<Nonlinearity>().map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn dimension(&self) -> Result<usize, CliError> {
        let g = self.grid.geometry()?;
        let n = self.n.unwrap_or(g.dim());
        if n != g.dim() {
            return Err(CliError::Config(format!("N = {n} but the grid is {}-dimensional", g.dim())));
        }
        Ok(n)
    }

    pub fn require_r(&self) -> Result<f64, CliError> {
        self.r.ok_or_else(|| CliError::Config("this command needs r".into()))
    }

    /// Initial data plus, for singular profiles, their provenance.
    pub fn build_data(&self, geometry: &Geometry) -> Result<(GridField, Option<SingularData>), CliError> {
        let field = match &self.data {
            DataSpec::Constant { value } => GridField::constant(geometry.clone(), *value)?,
            DataSpec::Bump { amplitude, width, base } => GridField::from_fn(geometry.clone(), |x| {
                base + amplitude * (-x.iter().map(|c| c * c).sum::<f64>() / (width * width)).exp()
            })?,
            DataSpec::Noise { amplitude, base } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let values = (0..geometry.len()).map(|_| base + amplitude * rng.gen::<f64>()).collect();
                GridField::new(geometry.clone(), values)?
            }
            DataSpec::File { path } => io::load(path)?,
            DataSpec::ExpSingular { growth, alpha, s0 } => {
                let d = exp_singular(&growth.build(*s0)?, *alpha, geometry)?;
                return Ok((d.field.clone(), Some(d)));
            }
            DataSpec::PowerSingular { r, kappa } => {
                let nl = self.nonlinearity()?;
                let d = power_singular(&nl, *r, geometry.dim(), geometry, *kappa)?;
                return Ok((d.field.clone(), Some(d)));
            }
        };
        Ok((field, None))
    }

    pub fn growth(&self) -> Result<ConvexGrowth, CliError> {
        match &self.data {
            DataSpec::ExpSingular { growth, s0, .. } => growth.build(*s0),
            _ => Err(CliError::Config("certify needs exp_singular data".into())),
        }
    }
}
