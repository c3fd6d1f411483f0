use nalgebra::Matrix2;
use rayon::prelude::*;

use super::ErgodicError;
use crate::geometry::{MapHandle, Point, Space};

/// Finite-horizon estimate of a subadditive rate.
#[derive(Clone, Debug, PartialEq)]
pub struct RateEstimate {
    /// Entry for the largest horizon.
    pub value: f64,
    pub n_used: usize,
    /// `per_n_values[n - 1]` is the grid minimum at horizon `n`, divided by `n`.
    pub per_n_values: Vec<f64>,
    pub grid_resolution: usize,
    /// `min_n per_n_values[n]`.
    pub fekete_min: f64,
}

impl RateEstimate {
    fn from_sequence(per_n_values: Vec<f64>, grid_resolution: usize) -> Self {
        let value = *per_n_values.last().expect("n_max >= 1");
        let fekete_min = per_n_values.iter().copied().fold(f64::INFINITY, f64::min);
        RateEstimate {
            value,
            n_used: per_n_values.len(),
            per_n_values,
            grid_resolution,
            fekete_min,
        }
    }
}

/// Singular values `(σ_min, σ_max)` of a 2×2 matrix.
pub fn singular_values(m: &Matrix2<f64>) -> (f64, f64) {
    let fro = m.norm_squared();
    let det = m.determinant();
    let disc = (fro * fro - 4.0 * det * det).max(0.0).sqrt();
    let smax = (0.5 * (fro + disc)).sqrt();
    let smin = if smax > 0.0 { det.abs() / smax } else { 0.0 };
    (smin, smax)
}

fn tangent_min_sv(t: &Matrix2<f64>, dim: usize) -> f64 {
    if dim == 1 {
        t[(0, 0)].abs()
    } else {
        singular_values(t).0
    }
}

/// Smallest singular value of the tangent map at `x`.
pub fn expansion_constant(map: &MapHandle, x: &Point) -> Result<f64, ErgodicError> {
    let t = map.tangent(x)?;
    Ok(tangent_min_sv(&t, map.dim()))
}

/// Per-horizon grid minima of `log E(φⁿ,x)` and `log J(φⁿ,x)` along every
/// grid orbit, from which any `𝓔𝓥_k` can be read off.
#[derive(Clone, Debug)]
pub struct ExpansionProfile {
    pub grid_resolution: usize,
    pub n_max: usize,
    /// `log_e[p][n - 1]` and `log_j[p][n - 1]` for grid point `p`.
    log_e: Vec<Vec<f64>>,
    log_j: Vec<Vec<f64>>,
}

impl ExpansionProfile {
    /// `ℰ` estimate: `(1/n) min_x log E(φⁿ,x)`.
    pub fn rate(&self) -> RateEstimate {
        self.combine(0.0, 1.0)
    }

    /// `𝓔𝓥_k` estimate: `(1/n) min_x [log J(φⁿ,x) + k log E(φⁿ,x)]`.
    pub fn volume_rate(&self, k: u32) -> RateEstimate {
        self.combine(1.0, k as f64)
    }

    fn combine(&self, wj: f64, we: f64) -> RateEstimate {
        let seq = (0..self.n_max)
            .map(|n| {
                let m = self
                    .log_e
                    .iter()
                    .zip(&self.log_j)
                    .map(|(e, j)| wj * j[n] + we * e[n])
                    .fold(f64::INFINITY, f64::min);
                m / (n + 1) as f64
            })
            .collect();
        RateEstimate::from_sequence(seq, self.grid_resolution)
    }
}

/// Grid of `res` points per dimension on the map's space. Torus grids start
/// at 0 so that fixed points at rational positions are sampled.
pub fn space_grid(space: &Space, res: usize) -> Vec<Point> {
    let (lo, hi) = space.bounds();
    let coord = |i: usize, j: usize| {
        if space.is_torus() {
            j as f64 / res as f64
        } else {
            lo[i] + (j as f64 + 0.5) / res as f64 * (hi[i] - lo[i])
        }
    };
    match space.dim() {
        1 => (0..res).map(|j| Point::d1(coord(0, j))).collect(),
        _ => (0..res)
            .flat_map(|a| (0..res).map(move |b| (a, b)))
            .map(|(a, b)| Point::d2(coord(0, a), coord(1, b)))
            .collect(),
    }
}

fn orbit_profile(
    map: &MapHandle,
    x0: &Point,
    n_max: usize,
) -> Result<(Vec<f64>, Vec<f64>), ErgodicError> {
    let dim = map.dim();
    let mut x = *x0;
    let mut prod = Matrix2::identity();
    let mut log_scale = 0.0;
    let mut log_det = 0.0;
    let mut log_j = 0.0;
    let mut le = Vec::with_capacity(n_max);
    let mut lj = Vec::with_capacity(n_max);
    for _ in 0..n_max {
        let (y, t, dlj) = map.step(&x)?;
        let (smin, smax) = if dim == 1 {
            let a = t[(0, 0)].abs();
            (a, a)
        } else {
            singular_values(&t)
        };
        if !(smin > f64::EPSILON * smax) {
            return Err(ErgodicError::Degenerate {
                point: x.coords().to_vec(),
            });
        }
        log_j += dlj;
        if dim == 1 {
            log_det += smin.ln();
            le.push(log_det);
        } else {
            log_det += t.determinant().abs().ln();
            prod = t * prod;
            let s = prod.norm();
            log_scale += s.ln();
            prod /= s;
            let (_, pmax) = singular_values(&prod);
            le.push(log_det - (log_scale + pmax.ln()));
        }
        lj.push(log_j);
        x = y;
    }
    Ok((le, lj))
}

/// Evaluate the tangent cocycle along every grid orbit up to `n_max`.
pub fn expansion_profile(
    map: &MapHandle,
    grid_res: usize,
    n_max: usize,
) -> Result<ExpansionProfile, ErgodicError> {
    if n_max < 1 {
        return Err(ErgodicError::InvalidInput("n_max must be at least 1".into()));
    }
    if grid_res < 8 {
        return Err(ErgodicError::InvalidInput(
            "grid_res must be at least 8 per dimension".into(),
        ));
    }
    let grid = space_grid(&map.space(), grid_res);
    let rows: Vec<(Vec<f64>, Vec<f64>)> = grid
        .par_iter()
        .map(|x| orbit_profile(map, x, n_max))
        .collect::<Result<_, _>>()?;
    let (log_e, log_j) = rows.into_iter().unzip();
    Ok(ExpansionProfile {
        grid_resolution: grid_res,
        n_max,
        log_e,
        log_j,
    })
}

/// `ℰ(φ) ≈ (1/n) log min_x E(φⁿ, x)` over a grid.
pub fn expansion_rate(
    map: &MapHandle,
    grid_res: usize,
    n_max: usize,
) -> Result<RateEstimate, ErgodicError> {
    Ok(expansion_profile(map, grid_res, n_max)?.rate())
}

/// `𝓔𝓥_k(φ) ≈ (1/n) min_x [log J(φⁿ,x) + k log E(φⁿ,x)]` over a grid.
pub fn expansion_volume_rate(
    map: &MapHandle,
    k: u32,
    grid_res: usize,
    n_max: usize,
) -> Result<RateEstimate, ErgodicError> {
    Ok(expansion_profile(map, grid_res, n_max)?.volume_rate(k))
}
