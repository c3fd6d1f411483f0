use nalgebra::{Matrix2, Vector2};

use super::flow::{flow_lifted, IntegratorOpts};
use super::{FieldSpec, GeometryError, Point, Space};

/// A smooth self-map of a flat space with its derivative.
#[derive(Clone, Debug, PartialEq)]
pub enum MapHandle {
    Identity { space: Space },
    /// `x ↦ x + θ mod 1` on the circle.
    Rotation { theta: f64 },
    /// `x ↦ m·x mod 1` on the circle.
    Expanding { m: u32 },
    /// `x ↦ Mx`, reduced modulo 1 on tori.
    Linear { space: Space, m: Matrix2<f64> },
    /// Time-`t` map of a catalog field.
    Flow {
        space: Space,
        field: FieldSpec,
        t: f64,
        opts: IntegratorOpts,
    },
}

/// Package the time-`t` flow of `field` as a map.
pub fn flow_map_as_function(
    space: &Space,
    field: &FieldSpec,
    t: f64,
    opts: &IntegratorOpts,
) -> Result<MapHandle, GeometryError> {
    if field.dim() != space.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: space.dim(),
            found: field.dim(),
        });
    }
    space.check_trapping(std::slice::from_ref(field))?;
    opts.steps_for(t)?;
    Ok(MapHandle::Flow {
        space: space.clone(),
        field: field.clone(),
        t,
        opts: *opts,
    })
}

impl MapHandle {
    pub fn space(&self) -> Space {
        match self {
            MapHandle::Identity { space } | MapHandle::Linear { space, .. } => space.clone(),
            MapHandle::Rotation { .. } | MapHandle::Expanding { .. } => Space::Torus1,
            MapHandle::Flow { space, .. } => space.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.space().dim()
    }

    /// Number of preimages of a point. Flow maps and rotations are
    /// diffeomorphisms; on boxes the degree of the (non-surjective) map is
    /// taken to be 1.
    pub fn degree(&self) -> u32 {
        match self {
            MapHandle::Expanding { m } => *m,
            MapHandle::Linear { space, m } if space.is_torus() => {
                let d = if space.dim() == 1 {
                    m[(0, 0)]
                } else {
                    m.determinant()
                };
                d.abs().round().max(1.0) as u32
            }
            _ => 1,
        }
    }

    /// Image, tangent and log-Jacobian at `x` in one call.
    pub fn step(&self, x: &Point) -> Result<(Point, Matrix2<f64>, f64), GeometryError> {
        let d = x.dim();
        match self {
            MapHandle::Identity { space } => {
                Ok((space.point(x.coords()), Matrix2::identity(), 0.0))
            }
            MapHandle::Rotation { theta } => Ok((
                Space::Torus1.point(&[x[0] + theta]),
                Matrix2::identity(),
                0.0,
            )),
            MapHandle::Expanding { m } => {
                let mf = *m as f64;
                Ok((
                    Space::Torus1.point(&[mf * x[0]]),
                    Matrix2::new(mf, 0.0, 0.0, 1.0),
                    mf.ln(),
                ))
            }
            MapHandle::Linear { space, m } => {
                let mut t = *m;
                if d == 1 {
                    t = Matrix2::new(m[(0, 0)], 0.0, 0.0, 1.0);
                }
                let y = t * x.vec();
                let det = t.determinant().abs();
                Ok((
                    Point::from_vec(space.reduce(y), d),
                    t,
                    det.ln(),
                ))
            }
            MapHandle::Flow {
                space,
                field,
                t,
                opts,
            } => {
                let s = flow_lifted(space, field, x.vec(), *t, opts)?;
                Ok((Point::from_vec(space.reduce(s.x), d), s.m, s.log_j))
            }
        }
    }

    pub fn apply(&self, x: &Point) -> Result<Point, GeometryError> {
        Ok(self.step(x)?.0)
    }

    pub fn tangent(&self, x: &Point) -> Result<Matrix2<f64>, GeometryError> {
        Ok(self.step(x)?.1)
    }

    pub fn log_jacobian(&self, x: &Point) -> Result<f64, GeometryError> {
        Ok(self.step(x)?.2)
    }

    /// Unreduced image for circle maps, used to follow lifts.
    pub fn lift_1d(&self, x: f64) -> Result<(f64, f64), GeometryError> {
        match self {
            MapHandle::Identity { .. } => Ok((x, 1.0)),
            MapHandle::Rotation { theta } => Ok((x + theta, 1.0)),
            MapHandle::Expanding { m } => Ok((*m as f64 * x, *m as f64)),
            MapHandle::Linear { m, .. } => Ok((m[(0, 0)] * x, m[(0, 0)])),
            MapHandle::Flow {
                space,
                field,
                t,
                opts,
            } => {
                let s = flow_lifted(space, field, Vector2::new(x, 0.0), *t, opts)?;
                Ok((s.x[0], s.m[(0, 0)]))
            }
        }
    }
}
