use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::Vector2;
use rayon::prelude::*;

use super::{GridFunction, TransferError};
use crate::geometry::{flow_lifted, wrap_centered, wrap_unit, MapHandle, Space};

/// Tolerance for `φ(ψ_b(y)) = y` at grid points.
pub const INVERSE_TOL: f64 = 1e-10;

/// Preimages `ψ_b(y_j)` and weights `|ψ_b'(y_j)|`, stored row-major by grid
/// index then branch.
#[derive(Clone, Debug)]
pub struct Branches {
    pub n: usize,
    pub degree: usize,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

/// A circle map together with its inverse branches.
#[derive(Debug)]
pub struct CircleMapModel {
    map: MapHandle,
    degree: u32,
    cache: Mutex<HashMap<usize, Arc<Branches>>>,
}

impl Clone for CircleMapModel {
    fn clone(&self) -> Self {
        CircleMapModel {
            map: self.map.clone(),
            degree: self.degree,
            cache: Mutex::new(self.cache.lock().unwrap().clone()),
        }
    }
}

impl CircleMapModel {
    /// Wrap an orientation-preserving circle map. The degree is the winding
    /// of the lift over one turn.
    pub fn new(map: MapHandle) -> Result<Self, TransferError> {
        if map.space() != Space::Torus1 {
            return Err(TransferError::InvalidInput(
                "transfer operators are implemented for circle maps only".into(),
            ));
        }
        let (a, _) = map.lift_1d(0.0)?;
        let (b, _) = map.lift_1d(1.0)?;
        let wind = (b - a).round();
        if wind < 1.0 {
            return Err(TransferError::InvalidInput(format!(
                "lift winds {wind} times; need an orientation-preserving map of degree >= 1"
            )));
        }
        Ok(CircleMapModel {
            map,
            degree: wind as u32,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn map(&self) -> &MapHandle {
        &self.map
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Inverse branches on the `n`-point grid, computed once per `n`.
    pub fn branches(&self, n: usize) -> Result<Arc<Branches>, TransferError> {
        if let Some(b) = self.cache.lock().unwrap().get(&n) {
            return Ok(b.clone());
        }
        let b = Arc::new(self.compute_branches(n)?);
        self.cache.lock().unwrap().insert(n, b.clone());
        Ok(b)
    }

    fn compute_branches(&self, n: usize) -> Result<Branches, TransferError> {
        let d = self.degree as usize;
        let rows: Vec<Vec<(f64, f64)>> = (0..n)
            .into_par_iter()
            .map(|j| self.preimages(j as f64 / n as f64))
            .collect::<Result<_, _>>()?;
        let mut points = Vec::with_capacity(n * d);
        let mut weights = Vec::with_capacity(n * d);
        for row in rows {
            for (x, w) in row {
                points.push(x);
                weights.push(w);
            }
        }
        Ok(Branches {
            n,
            degree: d,
            points,
            weights,
        })
    }

    fn preimages(&self, y: f64) -> Result<Vec<(f64, f64)>, TransferError> {
        let d = self.degree as usize;
        let out: Vec<(f64, f64)> = match &self.map {
            MapHandle::Identity { .. } => vec![(y, 1.0)],
            MapHandle::Rotation { theta } => vec![(wrap_unit(y - theta), 1.0)],
            MapHandle::Expanding { m } => (0..*m)
                .map(|b| ((y + b as f64) / *m as f64, 1.0 / *m as f64))
                .collect(),
            MapHandle::Flow {
                space,
                field,
                t,
                opts,
            } => {
                // The backward flow is only RK4-accurate as an inverse of the
                // forward map, so polish it with Newton on the forward map.
                let s = flow_lifted(space, field, Vector2::new(y, 0.0), -t, opts)?;
                let mut x = s.x[0];
                let mut w = s.m[(0, 0)].abs();
                for _ in 0..8 {
                    let (fx, dfx) = self.map.lift_1d(x)?;
                    let r = wrap_centered(fx - y);
                    w = 1.0 / dfx.abs();
                    if r.abs() < 1e-14 {
                        break;
                    }
                    x -= r / dfx;
                }
                vec![(wrap_unit(x), w)]
            }
            MapHandle::Linear { .. } => (0..d)
                .map(|b| self.newton_branch(y, b))
                .collect::<Result<_, _>>()?,
        };
        for (b, (x, _)) in out.iter().enumerate() {
            let fx = self.map.apply(&crate::geometry::Point::d1(*x))?[0];
            if wrap_centered(fx - y).abs() > INVERSE_TOL {
                return Err(TransferError::BranchInversionFailure { y, branch: b });
            }
        }
        Ok(out)
    }

    /// Solve `F(x) = y + F(0)`-aligned level on the lift by safeguarded Newton.
    fn newton_branch(&self, y: f64, b: usize) -> Result<(f64, f64), TransferError> {
        let fail = || TransferError::BranchInversionFailure { y, branch: b };
        let (f0, _) = self.map.lift_1d(0.0)?;
        let mut target = y + b as f64;
        while target < f0 {
            target += 1.0;
        }
        while target >= f0 + self.degree as f64 {
            target -= 1.0;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut x = 0.5;
        for _ in 0..200 {
            let (fx, dfx) = self.map.lift_1d(x)?;
            let r = fx - target;
            if r.abs() < 1e-13 {
                return Ok((wrap_unit(x), 1.0 / dfx.abs()));
            }
            if r > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let nx = x - r / dfx;
            x = if nx > lo && nx < hi { nx } else { 0.5 * (lo + hi) };
            if hi - lo < 1e-15 {
                let (_, dfx) = self.map.lift_1d(x)?;
                return Ok((wrap_unit(x), 1.0 / dfx.abs()));
            }
        }
        Err(fail())
    }
}

/// `ℒ_φ ρ(y) = Σ_b ρ(ψ_b(y))·|ψ_b'(y)|`, with ρ read through its periodic
/// cubic spline.
pub fn apply_transfer(
    model: &CircleMapModel,
    rho: &GridFunction,
) -> Result<GridFunction, TransferError> {
    let br = model.branches(rho.n())?;
    Ok(apply_with(&br, rho))
}

pub(crate) fn apply_with(br: &Branches, rho: &GridFunction) -> GridFunction {
    let spline = rho.spline();
    let d = br.degree;
    let values = (0..br.n)
        .map(|j| {
            (0..d)
                .map(|b| spline.eval(br.points[j * d + b]) * br.weights[j * d + b])
                .sum()
        })
        .collect();
    GridFunction::new(values).expect("same grid")
}
