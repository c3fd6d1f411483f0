use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::space::wrap_centered;
use super::GeometryError;

const TAU: f64 = 2.0 * PI;

/// Inner and outer radii of the bump that blends the linear germ `-ln(α)·x`
/// near 0 into `-ln(α)·sin(2πx)/(2π)` away from 0.
pub const CC_INNER: f64 = 0.15;
pub const CC_OUTER: f64 = 0.35;

/// Scalar profiles for one-dimensional fields.
#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    /// `offset + amp·sin(2π(freq·x + phase))`
    Sine {
        offset: f64,
        amp: f64,
        freq: f64,
        phase: f64,
    },
    /// `c0 + c1·x + c2·x² + ...`, meant for intervals.
    Poly(Vec<f64>),
}

impl Profile {
    fn eval(&self, x: f64) -> (f64, f64) {
        match self {
            Profile::Sine {
                offset,
                amp,
                freq,
                phase,
            } => {
                let arg = TAU * (freq * x + phase);
                (offset + amp * arg.sin(), amp * TAU * freq * arg.cos())
            }
            Profile::Poly(c) => {
                let mut v = 0.0;
                let mut d = 0.0;
                for &a in c.iter().rev() {
                    d = d * x + v;
                    v = v * x + a;
                }
                (v, d)
            }
        }
    }
}

/// A vector field from the closed catalog, with exact derivatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FieldConfig", into = "FieldConfig")]
pub enum FieldSpec {
    Constant { v: Vector2<f64>, dim: usize },
    /// `F(x, y) = (c, -s·sin(2πy))` on the two-torus.
    ShearSin { c: f64, s: f64 },
    /// `F(x) = A(x - p)`.
    Affine {
        a: Matrix2<f64>,
        p: Vector2<f64>,
        dim: usize,
    },
    Circle1D(Profile),
    /// Scalar field on the circle whose time-one map contracts by exactly `1/α`
    /// near 0 and repels at 1/2.
    ///
    /// With `λ = ln α`, `u` the centered coordinate and `b` a smooth step that is
    /// 1 for `|u| ≤ CC_INNER` and 0 for `|u| ≥ CC_OUTER`:
    ///
    /// `f(u) = -λ·[b(|u|)·u + (1 - b(|u|))·sin(2πu)/(2π)]`
    ///
    /// so `f` is linear on the inner disc, `f(1/2) = 0` and `f'(1/2) = λ`.
    CounterCampbell { alpha: f64 },
}

impl FieldSpec {
    pub fn constant(v: &[f64]) -> Self {
        let mut w = Vector2::zeros();
        for (i, x) in v.iter().enumerate() {
            w[i] = *x;
        }
        FieldSpec::Constant { v: w, dim: v.len() }
    }

    pub fn affine_1d(a: f64, p: f64) -> Self {
        FieldSpec::Affine {
            a: Matrix2::new(a, 0.0, 0.0, 0.0),
            p: Vector2::new(p, 0.0),
            dim: 1,
        }
    }

    pub fn affine_2d(a: Matrix2<f64>, p: [f64; 2]) -> Self {
        FieldSpec::Affine {
            a,
            p: Vector2::new(p[0], p[1]),
            dim: 2,
        }
    }

    pub fn circle_speed(c: f64) -> Self {
        FieldSpec::Circle1D(Profile::Sine {
            offset: c,
            amp: 0.0,
            freq: 1.0,
            phase: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            FieldSpec::Constant { dim, .. } | FieldSpec::Affine { dim, .. } => *dim,
            FieldSpec::ShearSin { .. } => 2,
            FieldSpec::Circle1D(_) | FieldSpec::CounterCampbell { .. } => 1,
        }
    }

    pub fn value(&self, x: &Vector2<f64>) -> Vector2<f64> {
        match self {
            FieldSpec::Constant { v, .. } => *v,
            FieldSpec::ShearSin { c, s } => Vector2::new(*c, -s * (TAU * x[1]).sin()),
            FieldSpec::Affine { a, p, .. } => a * (x - p),
            FieldSpec::Circle1D(prof) => Vector2::new(prof.eval(x[0]).0, 0.0),
            FieldSpec::CounterCampbell { alpha } => {
                Vector2::new(counter_campbell(alpha.ln(), x[0]).0, 0.0)
            }
        }
    }

    pub fn jacobian(&self, x: &Vector2<f64>) -> Matrix2<f64> {
        match self {
            FieldSpec::Constant { .. } => Matrix2::zeros(),
            FieldSpec::ShearSin { s, .. } => {
                Matrix2::new(0.0, 0.0, 0.0, -TAU * s * (TAU * x[1]).cos())
            }
            FieldSpec::Affine { a, .. } => *a,
            FieldSpec::Circle1D(prof) => Matrix2::new(prof.eval(x[0]).1, 0.0, 0.0, 0.0),
            FieldSpec::CounterCampbell { alpha } => {
                Matrix2::new(counter_campbell(alpha.ln(), x[0]).1, 0.0, 0.0, 0.0)
            }
        }
    }

    pub fn divergence(&self, x: &Vector2<f64>) -> f64 {
        self.jacobian(x).trace()
    }

    /// Value, Jacobian and divergence in one evaluation.
    pub fn eval(&self, x: &Vector2<f64>) -> (Vector2<f64>, Matrix2<f64>) {
        match self {
            FieldSpec::ShearSin { c, s } => {
                let (sn, cs) = (TAU * x[1]).sin_cos();
                (
                    Vector2::new(*c, -s * sn),
                    Matrix2::new(0.0, 0.0, 0.0, -TAU * s * cs),
                )
            }
            FieldSpec::Circle1D(prof) => {
                let (v, d) = prof.eval(x[0]);
                (Vector2::new(v, 0.0), Matrix2::new(d, 0.0, 0.0, 0.0))
            }
            FieldSpec::CounterCampbell { alpha } => {
                let (v, d) = counter_campbell(alpha.ln(), x[0]);
                (Vector2::new(v, 0.0), Matrix2::new(d, 0.0, 0.0, 0.0))
            }
            _ => (self.value(x), self.jacobian(x)),
        }
    }

    /// True when the Jacobian does not depend on the point.
    pub fn is_affine(&self) -> bool {
        matches!(self, FieldSpec::Constant { .. } | FieldSpec::Affine { .. })
    }
}

fn psi(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

fn dpsi(t: f64) -> f64 {
    if t > 0.0 {
        psi(t) / (t * t)
    } else {
        0.0
    }
}

/// Smooth step on `[0,1]` and its derivative.
fn smooth_step(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0);
    }
    let (a, b) = (psi(t), psi(1.0 - t));
    let den = a + b;
    let da = dpsi(t);
    let db = -dpsi(1.0 - t);
    (a / den, (da * den - a * (da + db)) / (den * den))
}

/// Value and derivative of the countercampbell generator at `x`.
fn counter_campbell(lambda: f64, x: f64) -> (f64, f64) {
    let u = wrap_centered(x);
    let r = u.abs();
    let w = CC_OUTER - CC_INNER;
    let (b, ds) = smooth_step((CC_OUTER - r) / w);
    let db = -ds / w;
    let (sn, cs) = (TAU * u).sin_cos();
    let v = -lambda * (b * u + (1.0 - b) * sn / TAU);
    let d = -lambda * (b + (1.0 - b) * cs + db * (r - sn.abs() / TAU));
    (v, d)
}

/// Serialized form of [`FieldSpec`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldConfig {
    Constant { v: Vec<f64> },
    ShearSin { c: f64, s: f64 },
    Affine { a: Vec<Vec<f64>>, p: Vec<f64> },
    #[serde(rename = "circle1d")]
    Circle1D { profile: String, params: Vec<f64> },
    CounterCampbell { alpha: f64 },
}

impl TryFrom<FieldConfig> for FieldSpec {
    type Error = GeometryError;

    fn try_from(c: FieldConfig) -> Result<Self, GeometryError> {
        let bad = |m: &str| Err(GeometryError::InvalidField(m.to_string()));
        match c {
            FieldConfig::Constant { v } => {
                if !(1..=2).contains(&v.len()) {
                    return bad("constant field needs 1 or 2 components");
                }
                Ok(FieldSpec::constant(&v))
            }
            FieldConfig::ShearSin { c, s } => Ok(FieldSpec::ShearSin { c, s }),
            FieldConfig::Affine { a, p } => {
                let d = p.len();
                if !(1..=2).contains(&d) || a.len() != d || a.iter().any(|r| r.len() != d) {
                    return bad("affine field needs a square matrix matching the anchor");
                }
                if d == 1 {
                    Ok(FieldSpec::affine_1d(a[0][0], p[0]))
                } else {
                    Ok(FieldSpec::affine_2d(
                        Matrix2::new(a[0][0], a[0][1], a[1][0], a[1][1]),
                        [p[0], p[1]],
                    ))
                }
            }
            FieldConfig::Circle1D { profile, params } => match profile.as_str() {
                "sine" => {
                    if params.len() != 4 {
                        return bad("sine profile takes [offset, amp, freq, phase]");
                    }
                    Ok(FieldSpec::Circle1D(Profile::Sine {
                        offset: params[0],
                        amp: params[1],
                        freq: params[2],
                        phase: params[3],
                    }))
                }
                "poly" => {
                    if params.is_empty() {
                        return bad("poly profile needs at least one coefficient");
                    }
                    Ok(FieldSpec::Circle1D(Profile::Poly(params)))
                }
                other => Err(GeometryError::InvalidField(format!(
                    "unknown circle1d profile `{other}` (expected sine or poly)"
                ))),
            },
            FieldConfig::CounterCampbell { alpha } => {
                if !(alpha > 1.0) || !alpha.is_finite() {
                    return bad("counter_campbell needs alpha > 1");
                }
                Ok(FieldSpec::CounterCampbell { alpha })
            }
        }
    }
}

impl From<FieldSpec> for FieldConfig {
    fn from(f: FieldSpec) -> Self {
        match f {
            FieldSpec::Constant { v, dim } => FieldConfig::Constant {
                v: v.iter().take(dim).copied().collect(),
            },
            FieldSpec::ShearSin { c, s } => FieldConfig::ShearSin { c, s },
            FieldSpec::Affine { a, p, dim } => FieldConfig::Affine {
                a: (0..dim).map(|i| (0..dim).map(|j| a[(i, j)]).collect()).collect(),
                p: p.iter().take(dim).copied().collect(),
            },
            FieldSpec::Circle1D(Profile::Sine {
                offset,
                amp,
                freq,
                phase,
            }) => FieldConfig::Circle1D {
                profile: "sine".into(),
                params: vec![offset, amp, freq, phase],
            },
            FieldSpec::Circle1D(Profile::Poly(c)) => FieldConfig::Circle1D {
                profile: "poly".into(),
                params: c,
            },
            FieldSpec::CounterCampbell { alpha } => FieldConfig::CounterCampbell { alpha },
        }
    }
}
