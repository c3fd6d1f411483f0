use nalgebra::DMatrix;

use super::{ExpAverageOperator, GridFunction, QuadOpts, TransferError};
use crate::geometry::{FieldSpec, Space};

/// Uniformization constant as a multiple of the largest exit rate.
pub const UNIFORM_MARGIN: f64 = 1.25;

/// Stationary per-mode densities of a one-dimensional switched flow.
#[derive(Clone, Debug, PartialEq)]
pub struct SwitchingDensity {
    /// One grid function per mode; together they integrate to 1.
    pub modes: Vec<GridFunction>,
    pub iterations: usize,
    /// L1 change of the last iteration, summed over modes.
    pub residual: f64,
    pub converged: bool,
}

/// Fixed point of `ν ↦ (νA)K` on the grid, where `K` flows each mode for an
/// exponential time of the uniformization rate and `A` switches modes.
///
/// The returned `ν` is the law of the continuous-time process. Only constant
/// rates are supported.
pub fn switching_invariant_density(
    space: &Space,
    fields: &[FieldSpec],
    rates: &DMatrix<f64>,
    n: usize,
    quad: &QuadOpts,
    tol: f64,
    max_iter: usize,
) -> Result<SwitchingDensity, TransferError> {
    let m = fields.len();
    if m == 0 || rates.shape() != (m, m) {
        return Err(TransferError::InvalidInput(
            "rates must be square with one row per field".into(),
        ));
    }
    if rates.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
        return Err(TransferError::InvalidInput("rates must be finite and >= 0".into()));
    }
    let exit: Vec<f64> = (0..m)
        .map(|i| (0..m).filter(|&j| j != i).map(|j| rates[(i, j)]).sum())
        .collect();
    let q_max = exit.iter().copied().fold(0.0, f64::max);
    if q_max <= 0.0 {
        return Err(TransferError::InvalidInput("no switching: all rates are zero".into()));
    }
    let alpha = UNIFORM_MARGIN * q_max;
    let ops = fields
        .iter()
        .map(|f| ExpAverageOperator::new(space, f, alpha, n, quad))
        .collect::<Result<Vec<_>, _>>()?;
    let switch = |i: usize, j: usize| {
        if i == j {
            1.0 - exit[i] / alpha
        } else {
            rates[(i, j)] / alpha
        }
    };
    let mut nu: Vec<GridFunction> = (0..m)
        .map(|_| GridFunction::constant(n, 1.0 / m as f64))
        .collect::<Result<_, _>>()?;
    let h = 1.0 / n as f64;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter && residual > tol {
        let mixed: Vec<GridFunction> = (0..m)
            .map(|i| {
                let v = (0..n)
                    .map(|x| (0..m).map(|j| switch(j, i) * nu[j].values()[x]).sum())
                    .collect();
                GridFunction::new(v)
            })
            .collect::<Result<_, _>>()?;
        let next: Vec<GridFunction> = ops
            .iter()
            .zip(&mixed)
            .map(|(op, g)| op.apply(g))
            .collect::<Result<_, _>>()?;
        let mass: f64 = next.iter().map(GridFunction::integral).sum();
        residual = 0.0;
        for (old, mut new) in nu.iter_mut().zip(next) {
            new.scale(1.0 / mass);
            residual += h * old
                .values()
                .iter()
                .zip(new.values())
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>();
            *old = new;
        }
        iterations += 1;
    }
    Ok(SwitchingDensity {
        modes: nu,
        iterations,
        residual,
        converged: residual <= tol,
    })
}
