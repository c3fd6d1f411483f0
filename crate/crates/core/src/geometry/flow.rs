use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::{FieldSpec, GeometryError, Point, Space};

/// Fixed-step RK4 settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorOpts {
    pub h: f64,
    pub max_steps: u64,
}

impl Default for IntegratorOpts {
    fn default() -> Self {
        IntegratorOpts {
            h: 1e-3,
            max_steps: 100_000_000,
        }
    }
}

impl IntegratorOpts {
    pub fn with_step(h: f64) -> Self {
        IntegratorOpts {
            h,
            ..Default::default()
        }
    }

    /// Number of equal steps covering `|t|` and the signed step length.
    pub fn steps_for(&self, t: f64) -> Result<(u64, f64), GeometryError> {
        if !t.is_finite() {
            return Err(GeometryError::NonFiniteTime(t));
        }
        if t == 0.0 {
            return Ok((0, 0.0));
        }
        let n = (t.abs() / self.h).ceil();
        if n > self.max_steps as f64 {
            return Err(GeometryError::StepCountOverflow {
                steps: n as u64,
                cap: self.max_steps,
            });
        }
        let n = n.max(1.0) as u64;
        Ok((n, t / n as f64))
    }
}

/// Endpoint, tangent map and log-Jacobian of a flow segment.
///
/// For one-dimensional spaces only the `(0, 0)` entry of `tangent` is
/// meaningful; the rest stays the identity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowResult {
    pub endpoint: Point,
    pub tangent: Matrix2<f64>,
    pub log_jacobian: f64,
}

impl FlowResult {
    pub fn tangent_det(&self) -> f64 {
        self.tangent.determinant()
    }
}

/// State of the joint system: position, tangent matrix, integrated divergence.
#[derive(Clone, Copy, Debug)]
pub struct JointState {
    pub x: Vector2<f64>,
    pub m: Matrix2<f64>,
    pub log_j: f64,
}

impl JointState {
    pub fn start(x: Vector2<f64>) -> Self {
        JointState {
            x,
            m: Matrix2::identity(),
            log_j: 0.0,
        }
    }
}

/// One RK4 step of the position only.
#[inline]
pub fn rk4_state(f: &FieldSpec, x: &Vector2<f64>, dt: f64) -> Vector2<f64> {
    let k1 = f.value(x);
    let k2 = f.value(&(x + k1 * (0.5 * dt)));
    let k3 = f.value(&(x + k2 * (0.5 * dt)));
    let k4 = f.value(&(x + k3 * dt));
    x + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0)
}

/// One RK4 step of the joint (position, tangent, divergence) system.
#[inline]
pub fn rk4_joint(f: &FieldSpec, s: &JointState, dt: f64) -> JointState {
    let rhs = |x: &Vector2<f64>, m: &Matrix2<f64>| {
        let (v, j) = f.eval(x);
        (v, j * m, j.trace())
    };
    let (a1, b1, c1) = rhs(&s.x, &s.m);
    let (a2, b2, c2) = rhs(&(s.x + a1 * (0.5 * dt)), &(s.m + b1 * (0.5 * dt)));
    let (a3, b3, c3) = rhs(&(s.x + a2 * (0.5 * dt)), &(s.m + b2 * (0.5 * dt)));
    let (a4, b4, c4) = rhs(&(s.x + a3 * dt), &(s.m + b3 * dt));
    JointState {
        x: s.x + (a1 + (a2 + a3) * 2.0 + a4) * (dt / 6.0),
        m: s.m + (b1 + (b2 + b3) * 2.0 + b4) * (dt / 6.0),
        log_j: s.log_j + (c1 + 2.0 * (c2 + c3) + c4) * (dt / 6.0),
    }
}

fn check_dims(space: &Space, field: &FieldSpec, x: &Point) -> Result<(), GeometryError> {
    if field.dim() != space.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: space.dim(),
            found: field.dim(),
        });
    }
    if x.dim() != space.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: space.dim(),
            found: x.dim(),
        });
    }
    Ok(())
}

fn exit_check(space: &Space, x: &Vector2<f64>, t: f64) -> Result<(), GeometryError> {
    if space.contains(x) {
        Ok(())
    } else {
        Err(GeometryError::BoundaryExit {
            t,
            point: [x[0], x[1]],
        })
    }
}

/// Integrate `x' = F(x)` for time `t` together with its tangent and the
/// Liouville integral of the divergence.
pub fn flow(
    space: &Space,
    field: &FieldSpec,
    x: &Point,
    t: f64,
    opts: &IntegratorOpts,
) -> Result<FlowResult, GeometryError> {
    check_dims(space, field, x)?;
    let s = flow_lifted(space, field, x.vec(), t, opts)?;
    Ok(FlowResult {
        endpoint: Point::from_vec(space.reduce(s.x), space.dim()),
        tangent: s.m,
        log_jacobian: s.log_j,
    })
}

/// Joint flow without reducing torus coordinates at the end.
pub fn flow_lifted(
    space: &Space,
    field: &FieldSpec,
    x: Vector2<f64>,
    t: f64,
    opts: &IntegratorOpts,
) -> Result<JointState, GeometryError> {
    let (n, dt) = opts.steps_for(t)?;
    let mut s = JointState::start(x);
    let boxed = !space.is_torus();
    for i in 0..n {
        s = rk4_joint(field, &s, dt);
        if boxed {
            exit_check(space, &s.x, (i + 1) as f64 * dt)?;
        }
    }
    Ok(s)
}

/// Position-only flow, the fast path used by the simulators.
pub fn flow_point(
    space: &Space,
    field: &FieldSpec,
    x: &Point,
    t: f64,
    opts: &IntegratorOpts,
) -> Result<Point, GeometryError> {
    check_dims(space, field, x)?;
    let (n, dt) = opts.steps_for(t)?;
    let mut v = x.vec();
    let boxed = !space.is_torus();
    for i in 0..n {
        v = rk4_state(field, &v, dt);
        if boxed {
            exit_check(space, &v, (i + 1) as f64 * dt)?;
        }
    }
    Ok(Point::from_vec(space.reduce(v), space.dim()))
}

/// Flow forward for `t ≥ 0` and report occupation with trapezoid weights.
///
/// `visit(point, weight)` receives every grid node of the integration with
/// half the step length at the two ends of each step, so the weights add up
/// to `t`. Returns the endpoint.
pub fn flow_occupation<V: FnMut(&Vector2<f64>, f64)>(
    space: &Space,
    field: &FieldSpec,
    x: &Point,
    t: f64,
    opts: &IntegratorOpts,
    mut visit: V,
) -> Result<Point, GeometryError> {
    check_dims(space, field, x)?;
    debug_assert!(t >= 0.0);
    let (n, dt) = opts.steps_for(t)?;
    let mut v = x.vec();
    let boxed = !space.is_torus();
    for i in 0..n {
        visit(&space.reduce(v), 0.5 * dt);
        v = rk4_state(field, &v, dt);
        if boxed {
            exit_check(space, &v, (i + 1) as f64 * dt)?;
        }
        visit(&space.reduce(v), 0.5 * dt);
    }
    Ok(Point::from_vec(space.reduce(v), space.dim()))
}
