use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::{FieldSpec, GeometryError};

/// Number of boundary samples used to certify that a trapping box points inward.
pub const BOUNDARY_SAMPLES: usize = 1000;

/// A flat compact state space.
///
/// Torus coordinates live in `[0,1)^d`. A trapping box is an axis-aligned
/// interval or rectangle that every assigned field must enter strictly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Space {
    Torus1,
    Torus2,
    TrappingBox { lower: Vec<f64>, upper: Vec<f64> },
}

impl Space {
    pub fn dim(&self) -> usize {
        match self {
            Space::Torus1 => 1,
            Space::Torus2 => 2,
            Space::TrappingBox { lower, .. } => lower.len(),
        }
    }

    pub fn is_torus(&self) -> bool {
        matches!(self, Space::Torus1 | Space::Torus2)
    }

    /// Lower and upper corners. Tori report the unit cube.
    pub fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        match self {
            Space::Torus1 | Space::Torus2 => ([0.0; 2], [1.0; 2]),
            Space::TrappingBox { lower, upper } => {
                let mut lo = [0.0; 2];
                let mut hi = [1.0; 2];
                for i in 0..lower.len().min(2) {
                    lo[i] = lower[i];
                    hi[i] = upper[i];
                }
                (lo, hi)
            }
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if let Space::TrappingBox { lower, upper } = self {
            if lower.len() != upper.len() || !(1..=2).contains(&lower.len()) {
                return Err(GeometryError::InvalidSpace(
                    "box corners must both have dimension 1 or 2".into(),
                ));
            }
            if lower.iter().zip(upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
                return Err(GeometryError::InvalidSpace("box needs lower < upper".into()));
            }
        }
        Ok(())
    }

    /// Reduce torus coordinates modulo 1; boxes are left untouched.
    pub fn reduce(&self, v: Vector2<f64>) -> Vector2<f64> {
        match self {
            Space::Torus1 => Vector2::new(wrap_unit(v[0]), 0.0),
            Space::Torus2 => Vector2::new(wrap_unit(v[0]), wrap_unit(v[1])),
            Space::TrappingBox { .. } => v,
        }
    }

    pub fn contains(&self, v: &Vector2<f64>) -> bool {
        match self {
            Space::Torus1 | Space::Torus2 => true,
            Space::TrappingBox { lower, upper } => {
                (0..lower.len()).all(|i| v[i] >= lower[i] && v[i] <= upper[i])
            }
        }
    }

    pub fn point(&self, coords: &[f64]) -> Point {
        let p = Point::new(coords);
        Point::from_vec(self.reduce(p.vec()), self.dim())
    }

    /// Check that every field points strictly inward on a boundary grid.
    ///
    /// Tori have no boundary and always pass.
    pub fn check_trapping(&self, fields: &[FieldSpec]) -> Result<(), GeometryError> {
        self.validate()?;
        let Space::TrappingBox { lower, upper } = self else {
            return Ok(());
        };
        for (idx, f) in fields.iter().enumerate() {
            if f.dim() != lower.len() {
                return Err(GeometryError::DimensionMismatch {
                    expected: lower.len(),
                    found: f.dim(),
                });
            }
            for (x, normal) in boundary_samples(lower, upper) {
                let flux = f.value(&x).dot(&normal);
                if !(flux < 0.0) {
                    return Err(GeometryError::NotTrapping {
                        field: idx,
                        point: [x[0], x[1]],
                    });
                }
            }
        }
        Ok(())
    }
}

fn boundary_samples(lower: &[f64], upper: &[f64]) -> Vec<(Vector2<f64>, Vector2<f64>)> {
    if lower.len() == 1 {
        return vec![
            (Vector2::new(lower[0], 0.0), Vector2::new(-1.0, 0.0)),
            (Vector2::new(upper[0], 0.0), Vector2::new(1.0, 0.0)),
        ];
    }
    let per_side = BOUNDARY_SAMPLES / 4;
    let mut out = Vec::with_capacity(BOUNDARY_SAMPLES);
    for j in 0..per_side {
        // Cell midpoints so that corners, where the normal is ambiguous, are skipped.
        let s = (j as f64 + 0.5) / per_side as f64;
        let x = lower[0] + s * (upper[0] - lower[0]);
        let y = lower[1] + s * (upper[1] - lower[1]);
        out.push((Vector2::new(x, lower[1]), Vector2::new(0.0, -1.0)));
        out.push((Vector2::new(x, upper[1]), Vector2::new(0.0, 1.0)));
        out.push((Vector2::new(lower[0], y), Vector2::new(-1.0, 0.0)));
        out.push((Vector2::new(upper[0], y), Vector2::new(1.0, 0.0)));
    }
    out
}

/// Reduce a real number into `[0, 1)`.
pub fn wrap_unit(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Signed periodic difference in `[-1/2, 1/2)`.
pub fn wrap_centered(x: f64) -> f64 {
    let r = wrap_unit(x + 0.5) - 0.5;
    if r < -0.5 {
        r + 1.0
    } else {
        r
    }
}

/// A point of a one- or two-dimensional space.
///
/// One-dimensional points carry a zero second coordinate so the flow code can
/// work with fixed 2-vectors throughout.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    coords: [f64; 2],
    dim: usize,
}

impl Point {
    pub fn new(coords: &[f64]) -> Self {
        assert!(
            (1..=2).contains(&coords.len()),
            "points have dimension 1 or 2"
        );
        let mut c = [0.0; 2];
        c[..coords.len()].copy_from_slice(coords);
        Point {
            coords: c,
            dim: coords.len(),
        }
    }

    pub fn d1(x: f64) -> Self {
        Point::new(&[x])
    }

    pub fn d2(x: f64, y: f64) -> Self {
        Point::new(&[x, y])
    }

    pub fn from_vec(v: Vector2<f64>, dim: usize) -> Self {
        let mut coords = [v[0], v[1]];
        if dim == 1 {
            coords[1] = 0.0;
        }
        Point { coords, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    pub fn vec(&self) -> Vector2<f64> {
        Vector2::new(self.coords[0], self.coords[1])
    }
}

impl std::ops::Index<usize> for Point {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.coords()[i]
    }
}
