//! Uniform rectangular grids in one to three dimensions.
//!
//! Node `i` along an axis sits at `origin + i·h`; values are row-major with
//! the last axis fastest. A periodic grid of `n` nodes covers a box of side
//! `n·h`.

pub mod io;
pub mod uloc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("dimension must be 1, 2 or 3 (got {0})")]
    BadDimension(usize),
    #[error("origin has {origin} entries for a {dim}-dimensional grid")]
    OriginMismatch { origin: usize, dim: usize },
    #[error("spacing must be positive and finite (got {0})")]
    BadSpacing(f64),
    #[error("every extent must be at least 1")]
    EmptyExtent,
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("value at index {index} is not finite")]
    NonFinite { index: usize },
    #[error("grids do not share geometry")]
    GeometryMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    ConstantExtension { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub origin: Vec<f64>,
    pub spacing: f64,
    pub extents: Vec<usize>,
    pub boundary: Boundary,
}

impl Geometry {
    pub fn new(origin: Vec<f64>, spacing: f64, extents: Vec<usize>, boundary: Boundary) -> Result<Self, GridError> {
        let g = Geometry { origin, spacing, extents, boundary };
        g.validate()?;
        Ok(g)
    }

    /// Periodic box `[-L/2, L/2)^dim` with `n` nodes per axis.
    pub fn periodic_cube(dim: usize, n: usize, side: f64) -> Result<Self, GridError> {
        Geometry::new(vec![-0.5 * side; dim], side / n as f64, vec![n; dim], Boundary::Periodic)
    }

    /// `n` nodes per axis, symmetric about the origin with a node at 0 when
    /// `n` is odd, extended by `value` outside.
    pub fn extended_cube(dim: usize, n: usize, h: f64, value: f64) -> Result<Self, GridError> {
        let half = (n as f64 - 1.0) * 0.5 * h;
        Geometry::new(vec![-half; dim], h, vec![n; dim], Boundary::ConstantExtension { value })
    }

    pub fn validate(&self) -> Result<(), GridError> {
        let dim = self.extents.len();
        if !(1..=3).contains(&dim) {
            return Err(GridError::BadDimension(dim));
        }
        if self.origin.len() != dim {
            return Err(GridError::OriginMismatch { origin: self.origin.len(), dim });
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(GridError::BadSpacing(self.spacing));
        }
        if self.extents.contains(&0) {
            return Err(GridError::EmptyExtent);
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn len(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim() as i32)
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.boundary, Boundary::Periodic)
    }

    /// Extents padded to three axes with leading ones.
    pub fn extents3(&self) -> [usize; 3] {
        let mut e = [1usize; 3];
        let off = 3 - self.dim();
        for (i, &n) in self.extents.iter().enumerate() {
            e[off + i] = n;
        }
        e
    }

    pub fn unravel(&self, flat: usize) -> [usize; 3] {
        let e = self.extents3();
        [flat / (e[1] * e[2]), (flat / e[2]) % e[1], flat % e[2]]
    }

    pub fn ravel(&self, idx: [usize; 3]) -> usize {
        let e = self.extents3();
        (idx[0] * e[1] + idx[1]) * e[2] + idx[2]
    }

    /// Physical coordinates of node `flat` (first `dim` entries meaningful).
    pub fn position(&self, flat: usize) -> [f64; 3] {
        let idx = self.unravel(flat);
        let off = 3 - self.dim();
        let mut x = [0.0; 3];
        for a in 0..self.dim() {
            x[a] = self.origin[a] + idx[off + a] as f64 * self.spacing;
        }
        x
    }

    /// Side lengths of the periodic box (`n·h` per axis).
    pub fn box_lengths(&self) -> Vec<f64> {
        self.extents.iter().map(|&n| n as f64 * self.spacing).collect()
    }

    /// Same shape with spacing and origin divided by `lambda`.
    pub fn dilated(&self, lambda: f64) -> Geometry {
        Geometry {
            origin: self.origin.iter().map(|o| o / lambda).collect(),
            spacing: self.spacing / lambda,
            extents: self.extents.clone(),
            boundary: self.boundary,
        }
    }

    /// Same box with spacing halved (periodic: twice the nodes; extended:
    /// `2n - 1` nodes so the old nodes are kept).
    pub fn refined(&self) -> Geometry {
        let extents = match self.boundary {
            Boundary::Periodic => self.extents.iter().map(|n| 2 * n).collect(),
            Boundary::ConstantExtension { .. } => self.extents.iter().map(|n| 2 * n - 1).collect(),
        };
        Geometry { origin: self.origin.clone(), spacing: 0.5 * self.spacing, extents, boundary: self.boundary }
    }

    /// Equal up to the extension value.
    pub fn same_shape(&self, other: &Geometry) -> bool {
        self.origin == other.origin
            && self.spacing == other.spacing
            && self.extents == other.extents
            && self.is_periodic() == other.is_periodic()
    }

    /// Copy with the extension value replaced (no-op on periodic grids).
    pub fn with_extension(&self, value: f64) -> Geometry {
        let mut g = self.clone();
        if let Boundary::ConstantExtension { .. } = g.boundary {
            g.boundary = Boundary::ConstantExtension { value };
        }
        g
    }

    /// Whether node `flat` touches the box edge (extension artefacts live there).
    pub fn is_edge(&self, flat: usize) -> bool {
        let idx = self.unravel(flat);
        let e = self.extents3();
        let off = 3 - self.dim();
        (off..3).any(|a| idx[a] == 0 || idx[a] + 1 == e[a])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub geometry: Geometry,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(geometry: Geometry, values: Vec<f64>) -> Result<Self, GridError> {
        geometry.validate()?;
        if values.len() != geometry.len() {
            return Err(GridError::LengthMismatch { expected: geometry.len(), got: values.len() });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite { index });
        }
        Ok(GridField { geometry, values })
    }

    pub fn constant(geometry: Geometry, c: f64) -> Result<Self, GridError> {
        let n = geometry.len();
        GridField::new(geometry, vec![c; n])
    }

    /// Samples `f` at every node.
    pub fn from_fn(geometry: Geometry, f: impl Fn(&[f64]) -> f64) -> Result<Self, GridError> {
        let d = geometry.dim();
        let values = (0..geometry.len()).map(|i| f(&geometry.position(i)[..d])).collect();
        GridField::new(geometry, values)
    }

    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.geometry.spacing
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Plain Riemann sum `Σ u h^N`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.geometry.cell_volume()
    }

    /// Pointwise map keeping geometry; errors if the result is not finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<GridField, GridError> {
        GridField::new(self.geometry.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<GridField, GridError> {
        GridField::new(self.geometry.clone(), values)
    }

    /// Value at integer offset `d` from node `idx`, honouring the boundary.
    pub fn value_at_offset(&self, idx: [usize; 3], d: [isize; 3]) -> f64 {
        let e = self.geometry.extents3();
        let mut j = [0usize; 3];
        for a in 0..3 {
            let k = idx[a] as isize + d[a];
            let n = e[a] as isize;
            if k < 0 || k >= n {
                match self.geometry.boundary {
                    Boundary::Periodic => j[a] = k.rem_euclid(n) as usize,
                    Boundary::ConstantExtension { value } => return value,
                }
            } else {
                j[a] = k as usize;
            }
        }
        self.values[self.geometry.ravel(j)]
    }

    /// Multilinear interpolation at physical point `x`, with periodic wrap or
    /// constant extension outside the box.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let g = &self.geometry;
        let dim = g.dim();
        let off = 3 - dim;
        let base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        let mut shift = [0isize; 3];
        for a in 0..dim {
            let t = (x[a] - g.origin[a]) / g.spacing;
            let fl = t.floor();
            frac[off + a] = t - fl;
            shift[off + a] = fl as isize;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << dim) {
            let mut w = 1.0;
            let mut d = [0isize; 3];
            for a in 0..dim {
                let bit = (corner >> a) & 1;
                let ax = off + a;
                w *= if bit == 1 { frac[ax] } else { 1.0 - frac[ax] };
                d[ax] = shift[ax] + bit as isize;
            }
            if w == 0.0 {
                continue;
            }
            acc += w * self.value_at_offset(base, d);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ravel_roundtrip() {
        let g = Geometry::new(vec![0.0, 0.0, 0.0], 0.1, vec![3, 4, 5], Boundary::Periodic).unwrap();
        for i in 0..g.len() {
            assert_eq!(g.ravel(g.unravel(i)), i);
        }
        assert_eq!(g.position(g.ravel([1, 2, 3])), [0.1, 0.2, 0.30000000000000004]);
    }

    #[test]
    fn rejects_bad_input() {
        let g = Geometry::periodic_cube(1, 4, 1.0).unwrap();
        assert!(matches!(GridField::new(g.clone(), vec![0.0; 3]), Err(GridError::LengthMismatch { .. })));
        assert!(matches!(GridField::new(g, vec![0.0, f64::NAN, 0.0, 0.0]), Err(GridError::NonFinite { index: 1 })));
        assert!(Geometry::new(vec![0.0; 4], 0.1, vec![2; 4], Boundary::Periodic).is_err());
    }

    #[test]
    fn interpolation_reproduces_linear_functions() {
        let g = Geometry::extended_cube(2, 11, 0.1, 0.0).unwrap();
        let u = GridField::from_fn(g, |x| 1.0 + 2.0 * x[0] - 3.0 * x[1]).unwrap();
        let v = u.interpolate(&[0.123, -0.377]);
        assert!((v - (1.0 + 0.246 + 1.131)).abs() < 1e-13);
    }

    #[test]
    fn interpolation_wraps_and_extends() {
        let g = Geometry::new(vec![0.0], 0.25, vec![4], Boundary::Periodic).unwrap();
        let u = GridField::new(g, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!((u.interpolate(&[0.875]) - 1.5).abs() < 1e-14);
        assert!((u.interpolate(&[1.25]) - 1.0).abs() < 1e-14);
        let e = Geometry::new(vec![0.0], 0.25, vec![4], Boundary::ConstantExtension { value: 7.0 }).unwrap();
        let w = GridField::new(e, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!((w.interpolate(&[0.875]) - 5.0).abs() < 1e-14);
        assert_eq!(w.interpolate(&[-3.0]), 7.0);
    }
}
