use nalgebra::Vector2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GridFunction, TransferError};
use crate::geometry::{rk4_joint, FieldSpec, GeometryError, IntegratorOpts, JointState, Space};

/// Quadrature settings for the exponential time average.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadOpts {
    pub nodes: usize,
    /// Truncation point in units of the mean time `1/α`.
    pub horizon: f64,
    pub integrator: IntegratorOpts,
}

impl Default for QuadOpts {
    fn default() -> Self {
        QuadOpts {
            nodes: 64,
            horizon: 40.0,
            integrator: IntegratorOpts::default(),
        }
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Physical coordinate of grid node `j` on the space: the unit circle or the
/// box interval.
fn node(space: &Space, n: usize, j: usize) -> f64 {
    let (lo, hi) = space.bounds();
    lo[0] + (hi[0] - lo[0]) * j as f64 / n as f64
}

fn to_unit(space: &Space, x: f64) -> f64 {
    let (lo, hi) = space.bounds();
    (x - lo[0]) / (hi[0] - lo[0])
}

/// Backward joint flow from `y` sampled at the increasing times `times`.
/// Entries are `None` once the trajectory has left a trapping box.
fn backward_samples(
    space: &Space,
    field: &FieldSpec,
    y: f64,
    times: &[f64],
    opts: &IntegratorOpts,
) -> Vec<Option<(f64, f64)>> {
    let mut s = JointState::start(Vector2::new(y, 0.0));
    let mut t_now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    let mut alive = true;
    for &t in times {
        if alive && t > t_now {
            let span = t - t_now;
            let n = (span / opts.h).ceil().max(1.0) as usize;
            let dt = span / n as f64;
            for _ in 0..n {
                s = rk4_joint(field, &s, -dt);
                if !space.contains(&s.x) {
                    alive = false;
                    break;
                }
            }
            t_now = t;
        }
        out.push(alive.then_some((s.x[0], s.log_j)));
    }
    out
}

/// `ℒ_{Φ^t} ρ(x) = ρ(Φ^{-t}x)·exp(-∫₀ᵗ div F(Φ^{-s}x) ds)` for one-dimensional
/// spaces. On a trapping interval the grid spans the interval and points
/// without a preimage get 0.
pub fn apply_transfer_flow(
    space: &Space,
    field: &FieldSpec,
    t: f64,
    rho: &GridFunction,
    opts: &IntegratorOpts,
) -> Result<GridFunction, TransferError> {
    check_1d(space, field)?;
    if !(t >= 0.0) {
        return Err(TransferError::InvalidInput("flow time must be >= 0".into()));
    }
    opts.steps_for(t)?;
    let n = rho.n();
    let spline = rho.spline();
    let values = (0..n)
        .into_par_iter()
        .map(|j| {
            match backward_samples(space, field, node(space, n, j), &[t], opts)[0] {
                Some((x, lj)) => spline.eval(to_unit(space, x)) * lj.exp(),
                None => 0.0,
            }
        })
        .collect();
    GridFunction::new(values)
}

/// `ℒ ρ = ∫₀^∞ α e^{-αt} ℒ_{Φ^t} ρ dt`, truncated at `horizon/α` and
/// evaluated with Gauss–Legendre nodes against the exponential weight.
pub fn transfer_exp_average(
    space: &Space,
    field: &FieldSpec,
    alpha: f64,
    rho: &GridFunction,
    quad: &QuadOpts,
) -> Result<GridFunction, TransferError> {
    ExpAverageOperator::new(space, field, alpha, rho.n(), quad)?.apply(rho)
}

/// [`transfer_exp_average`] with the backward flows precomputed, for repeated
/// application on one grid.
#[derive(Clone, Debug)]
pub struct ExpAverageOperator {
    n: usize,
    /// Per grid node: unit-interval preimage and combined weight.
    samples: Vec<Vec<(f64, f64)>>,
}

impl ExpAverageOperator {
    pub fn new(
        space: &Space,
        field: &FieldSpec,
        alpha: f64,
        n: usize,
        quad: &QuadOpts,
    ) -> Result<Self, TransferError> {
        check_1d(space, field)?;
        if !(alpha > 0.0) {
            return Err(TransferError::InvalidInput("alpha must be positive".into()));
        }
        GridFunction::constant(n, 0.0)?;
        let t_max = quad.horizon / alpha;
        quad.integrator.steps_for(t_max)?;
        let (z, w) = gauss_legendre(quad.nodes);
        let times: Vec<f64> = z.iter().map(|zi| 0.5 * t_max * (zi + 1.0)).collect();
        let mut weights: Vec<f64> = times
            .iter()
            .zip(&w)
            .map(|(t, wi)| 0.5 * t_max * wi * alpha * (-alpha * t).exp())
            .collect();
        // The truncated tail e^{-horizon} is dropped; renormalizing keeps mass exact.
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|v| *v /= total);
        let samples = (0..n)
            .into_par_iter()
            .map(|j| {
                backward_samples(space, field, node(space, n, j), &times, &quad.integrator)
                    .iter()
                    .zip(&weights)
                    .filter_map(|(s, wi)| s.map(|(x, lj)| (to_unit(space, x), wi * lj.exp())))
                    .collect()
            })
            .collect();
        Ok(ExpAverageOperator { n, samples })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn apply(&self, rho: &GridFunction) -> Result<GridFunction, TransferError> {
        if rho.n() != self.n {
            return Err(TransferError::InvalidInput(format!(
                "operator built for {} nodes, got {}",
                self.n,
                rho.n()
            )));
        }
        let spline = rho.spline();
        let values = self
            .samples
            .par_iter()
            .map(|row| row.iter().map(|(x, w)| w * spline.eval(*x)).sum())
            .collect();
        GridFunction::new(values)
    }
}

fn check_1d(space: &Space, field: &FieldSpec) -> Result<(), TransferError> {
    if space.dim() != 1 || field.dim() != 1 {
        return Err(GeometryError::DimensionMismatch {
            expected: 1,
            found: field.dim().max(space.dim()),
        }
        .into());
    }
    Ok(())
}
