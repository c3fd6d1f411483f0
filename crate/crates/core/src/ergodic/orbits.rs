use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::ErgodicError;
use crate::geometry::{
    flow_lifted, rk4_joint, wrap_centered, FieldSpec, IntegratorOpts, JointState, Point, Space,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitKind {
    Equilibrium,
    PeriodicOrbit,
}

/// A closed orbit or equilibrium with its Floquet (or Lyapunov) exponents.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitRecord {
    pub kind: OrbitKind,
    pub anchor: Point,
    /// Zero for equilibria.
    pub period: f64,
    /// Ascending per-unit-time exponents, one per dimension.
    pub floquet: Vec<f64>,
    /// `log J(Φ^T, anchor)` accumulated while detecting the orbit.
    pub log_jacobian: f64,
    pub section_axis: usize,
}

impl OrbitRecord {
    pub fn stable(&self) -> bool {
        self.floquet[0] < 0.0
    }

    /// The exponent transverse to the flow: the one farther from zero.
    pub fn transverse_exponent(&self) -> f64 {
        match self.kind {
            OrbitKind::Equilibrium => self.floquet[0],
            OrbitKind::PeriodicOrbit => *self
                .floquet
                .iter()
                .max_by(|a, b| a.abs().total_cmp(&b.abs()))
                .expect("nonempty"),
        }
    }
}

/// A seed point and the coordinate that defines its Poincaré section
/// `{z_axis ≡ seed_axis (mod 1)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitCandidate {
    pub seed: Vec<f64>,
    #[serde(default)]
    pub section_axis: usize,
}

impl OrbitCandidate {
    pub fn new(seed: &[f64], section_axis: usize) -> Self {
        OrbitCandidate {
            seed: seed.to_vec(),
            section_axis,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitOpts {
    pub integrator: IntegratorOpts,
    /// Longest flow time allowed for one return to the section.
    pub horizon: f64,
    pub time_tol: f64,
    pub closure_tol: f64,
    pub equilibrium_tol: f64,
    pub max_newton: usize,
}

impl Default for OrbitOpts {
    fn default() -> Self {
        OrbitOpts {
            integrator: IntegratorOpts::default(),
            horizon: 100.0,
            time_tol: 1e-10,
            closure_tol: 1e-10,
            equilibrium_tol: 1e-12,
            max_newton: 50,
        }
    }
}

/// Left and right side of the Liouville identity along an orbit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErgplanReport {
    /// `(1/T) log J(Φ^T, anchor)`, with `T = 1` for equilibria.
    pub mean_log_jacobian: f64,
    pub floquet_sum: f64,
    pub difference: f64,
}

fn invert(m: &Matrix2<f64>, dim: usize) -> Option<Matrix2<f64>> {
    if dim == 1 {
        let a = m[(0, 0)];
        (a.abs() > 1e-14).then(|| Matrix2::new(1.0 / a, 0.0, 0.0, 1.0))
    } else {
        m.try_inverse()
            .filter(|inv| inv.iter().all(|v| v.is_finite()))
    }
}

fn newton_equilibrium(
    space: &Space,
    field: &FieldSpec,
    seed: Vector2<f64>,
    opts: &OrbitOpts,
) -> Option<Vector2<f64>> {
    let dim = space.dim();
    let mut x = seed;
    for _ in 0..opts.max_newton {
        let (v, j) = field.eval(&x);
        if v.norm() < opts.equilibrium_tol {
            return Some(space.reduce(x));
        }
        let inv = invert(&j, dim)?;
        let mut dx = inv * v;
        if dim == 1 {
            dx[1] = 0.0;
        }
        let len = dx.norm();
        if len > 0.1 {
            dx *= 0.1 / len;
        }
        x -= dx;
        if (x - seed).norm() > 0.5 {
            return None;
        }
    }
    let v = field.value(&x);
    (v.norm() < opts.equilibrium_tol).then(|| space.reduce(x))
}

fn eigen_exponents(m: &Matrix2<f64>, dim: usize, scale: f64, log_modulus: bool) -> Vec<f64> {
    let mut out = if dim == 1 {
        vec![if log_modulus {
            m[(0, 0)].abs().ln()
        } else {
            m[(0, 0)]
        }]
    } else {
        let tr = m.trace();
        let det = m.determinant();
        let disc = 0.25 * tr * tr - det;
        if disc >= 0.0 {
            let r = disc.sqrt();
            let (a, b) = (0.5 * tr + r, 0.5 * tr - r);
            if log_modulus {
                vec![a.abs().ln(), b.abs().ln()]
            } else {
                vec![a, b]
            }
        } else if log_modulus {
            let l = 0.5 * det.abs().ln();
            vec![l, l]
        } else {
            vec![0.5 * tr, 0.5 * tr]
        }
    };
    out.iter_mut().for_each(|v| *v /= scale);
    out.sort_by(|a, b| a.total_cmp(b));
    out
}

struct Crossing {
    time: f64,
    state: JointState,
}

/// Flow from `x` until the section coordinate next crosses an integer level
/// above its running floor in the direction `sign`.
fn first_return(
    field: &FieldSpec,
    x: Vector2<f64>,
    axis: usize,
    sign: f64,
    opts: &OrbitOpts,
) -> Option<Crossing> {
    let h = opts.integrator.h;
    let base = x[axis];
    let level = |s: &JointState| (s.x[axis] - base) * sign;
    let mut s = JointState::start(x);
    let mut t = 0.0;
    while t < opts.horizon {
        let g_prev = level(&s);
        let target = g_prev.floor() + 1.0;
        let next = rk4_joint(field, &s, h);
        if level(&next) >= target {
            let (mut lo, mut hi) = (0.0, h);
            while hi - lo > opts.time_tol {
                let mid = 0.5 * (lo + hi);
                if level(&rk4_joint(field, &s, mid)) >= target {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let tau = 0.5 * (lo + hi);
            return Some(Crossing {
                time: t + tau,
                state: rk4_joint(field, &s, tau),
            });
        }
        s = next;
        t += h;
    }
    None
}

fn periodic_orbit(
    space: &Space,
    field: &FieldSpec,
    cand: &OrbitCandidate,
    opts: &OrbitOpts,
) -> Result<Option<OrbitRecord>, ErgodicError> {
    let dim = space.dim();
    let axis = cand.section_axis;
    if axis >= dim {
        return Err(ErgodicError::InvalidInput(format!(
            "section axis {axis} out of range for dimension {dim}"
        )));
    }
    let mut x = Point::new(&cand.seed).vec();
    let f0 = field.value(&x)[axis];
    let sign = if f0 < 0.0 { -1.0 } else { 1.0 };
    let no_cross = || ErgodicError::NoSectionCrossing {
        seed: cand.seed.clone(),
        horizon: opts.horizon,
    };
    if dim == 1 {
        if !space.is_torus() {
            return Ok(None);
        }
        let c = first_return(field, x, axis, sign, opts).ok_or_else(no_cross)?;
        return Ok(Some(record(space, x, c, 0, opts)));
    }
    let other = 1 - axis;
    for _ in 0..opts.max_newton {
        let c = first_return(field, x, axis, sign, opts).ok_or_else(no_cross)?;
        let residual = wrap_centered(c.state.x[other] - x[other]);
        if residual.abs() < opts.closure_tol {
            return Ok(Some(record(space, x, c, axis, opts)));
        }
        let fz = field.value(&c.state.x);
        if fz[axis].abs() < 1e-14 {
            return Ok(None);
        }
        let dz = c.state.m.column(other).into_owned();
        let dt = -dz[axis] / fz[axis];
        let dp = dz[other] + fz[other] * dt;
        let slope = dp - 1.0;
        if slope.abs() < 1e-8 {
            // Return map is a translation: no isolated closed orbit here.
            return Ok(None);
        }
        let step = (residual / slope).clamp(-0.1, 0.1);
        x[other] -= step;
    }
    Ok(None)
}

fn record(
    space: &Space,
    x: Vector2<f64>,
    c: Crossing,
    axis: usize,
    _opts: &OrbitOpts,
) -> OrbitRecord {
    let dim = space.dim();
    let floquet = eigen_exponents(&c.state.m, dim, c.time, true);
    OrbitRecord {
        kind: OrbitKind::PeriodicOrbit,
        anchor: Point::from_vec(space.reduce(x), dim),
        period: c.time,
        floquet,
        log_jacobian: c.state.log_j,
        section_axis: axis,
    }
}

fn same_orbit(a: &OrbitRecord, b: &OrbitRecord, space: &Space) -> bool {
    if a.kind != b.kind {
        return false;
    }
    let close = |u: f64, v: f64| {
        let d = if space.is_torus() {
            wrap_centered(u - v)
        } else {
            u - v
        };
        d.abs() < 1e-6
    };
    match a.kind {
        OrbitKind::Equilibrium => (0..space.dim()).all(|i| close(a.anchor[i], b.anchor[i])),
        OrbitKind::PeriodicOrbit => {
            (a.period - b.period).abs() < 1e-6 * a.period.max(1.0)
                && a.section_axis == b.section_axis
                && (0..space.dim())
                    .filter(|&i| i != a.section_axis || space.dim() == 1)
                    .all(|i| close(a.anchor[i], b.anchor[i]))
        }
    }
}

/// Locate equilibria and closed orbits from seeds.
///
/// A seed first tries Newton's method on `F = 0`; if that fails it is
/// followed to its Poincaré section and the return map is solved for a fixed
/// point. Seeds whose return map has no isolated fixed point (for example an
/// irrational translation) contribute nothing. The result is therefore a list
/// over detected orbits, not a certified enumeration.
pub fn find_periodic_orbits(
    space: &Space,
    field: &FieldSpec,
    candidates: &[OrbitCandidate],
    opts: &OrbitOpts,
) -> Result<Vec<OrbitRecord>, ErgodicError> {
    let dim = space.dim();
    let mut out: Vec<OrbitRecord> = Vec::new();
    for cand in candidates {
        if cand.seed.len() != dim {
            return Err(ErgodicError::InvalidInput(format!(
                "seed {:?} does not have dimension {dim}",
                cand.seed
            )));
        }
        let seed = Point::new(&cand.seed).vec();
        let rec = if let Some(eq) = newton_equilibrium(space, field, seed, opts) {
            let j = field.jacobian(&eq);
            Some(OrbitRecord {
                kind: OrbitKind::Equilibrium,
                anchor: Point::from_vec(eq, dim),
                period: 0.0,
                floquet: eigen_exponents(&j, dim, 1.0, false),
                log_jacobian: 0.0,
                section_axis: cand.section_axis,
            })
        } else if space.is_torus() {
            periodic_orbit(space, field, cand, opts)?
        } else {
            None
        };
        if let Some(r) = rec {
            if !out.iter().any(|o| same_orbit(o, &r, space)) {
                out.push(r);
            }
        }
    }
    out.sort_by(|a, b| {
        a.kind
            .cmp(&b.kind)
            .then(a.anchor.coords().partial_cmp(b.anchor.coords()).unwrap())
    });
    Ok(out)
}

/// Compare `(1/T) log J(Φ^T)` with the sum of Floquet exponents.
///
/// The Jacobian is recomputed by flowing from the anchor, so the check is
/// independent of the bookkeeping done during detection. Equilibria use
/// `T = 1`.
pub fn ergplan_check(
    space: &Space,
    field: &FieldSpec,
    orbit: &OrbitRecord,
    opts: &IntegratorOpts,
) -> Result<ErgplanReport, ErgodicError> {
    let t = match orbit.kind {
        OrbitKind::Equilibrium => 1.0,
        OrbitKind::PeriodicOrbit => orbit.period,
    };
    let s = flow_lifted(space, field, orbit.anchor.vec(), t, opts)?;
    let mean_log_jacobian = s.log_j / t;
    let floquet_sum: f64 = orbit.floquet.iter().sum();
    Ok(ErgplanReport {
        mean_log_jacobian,
        floquet_sum,
        difference: (mean_log_jacobian - floquet_sum).abs(),
    })
}
