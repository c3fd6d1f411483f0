use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::PdmpError;
use crate::geometry::Space;

/// Uniform histogram grid with `bins` cells per dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistGrid {
    pub dim: usize,
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    pub bins: usize,
    /// Wrap coordinates instead of counting them as outside.
    #[serde(default)]
    pub periodic: bool,
}

impl HistGrid {
    pub fn new(dim: usize, lower: [f64; 2], upper: [f64; 2], bins: usize, periodic: bool) -> Result<Self, PdmpError> {
        let g = HistGrid {
            dim,
            lower,
            upper,
            bins,
            periodic,
        };
        g.validate()?;
        Ok(g)
    }

    /// The natural grid of a state space.
    pub fn for_space(space: &Space, bins: usize) -> Self {
        let (lower, upper) = space.bounds();
        HistGrid {
            dim: space.dim(),
            lower,
            upper,
            bins,
            periodic: space.is_torus(),
        }
    }

    pub fn validate(&self) -> Result<(), PdmpError> {
        if !(1..=2).contains(&self.dim) || self.bins == 0 {
            return Err(PdmpError::InvalidGrid(format!(
                "dim {} with {} bins",
                self.dim, self.bins
            )));
        }
        for d in 0..self.dim {
            if !(self.upper[d] > self.lower[d]) || !self.lower[d].is_finite() || !self.upper[d].is_finite() {
                return Err(PdmpError::InvalidGrid(format!(
                    "axis {d} has bounds [{}, {}]",
                    self.lower[d], self.upper[d]
                )));
            }
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.bins.pow(self.dim as u32)
    }

    /// Lebesgue measure of one cell.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim)
            .map(|d| (self.upper[d] - self.lower[d]) / self.bins as f64)
            .product()
    }

    fn axis_index(&self, d: usize, v: f64) -> Option<usize> {
        let s = (v - self.lower[d]) / (self.upper[d] - self.lower[d]);
        let n = self.bins as f64;
        if self.periodic {
            let s = s - s.floor();
            Some(((s * n) as usize).min(self.bins - 1))
        } else if (0.0..=1.0).contains(&s) {
            Some(((s * n) as usize).min(self.bins - 1))
        } else {
            None
        }
    }

    /// Flat cell index (row-major, first axis slowest).
    pub fn index(&self, x: &Vector2<f64>) -> Option<usize> {
        let i = self.axis_index(0, x[0])?;
        if self.dim == 1 {
            return Some(i);
        }
        let j = self.axis_index(1, x[1])?;
        Some(i * self.bins + j)
    }

    /// Center of a flat cell index.
    pub fn center(&self, idx: usize) -> [f64; 2] {
        let c = |d: usize, k: usize| {
            self.lower[d] + (k as f64 + 0.5) / self.bins as f64 * (self.upper[d] - self.lower[d])
        };
        if self.dim == 1 {
            [c(0, idx), 0.0]
        } else {
            [c(0, idx / self.bins), c(1, idx % self.bins)]
        }
    }
}

/// Per-mode weighted histogram of visited states.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupationAccumulator {
    pub grid: HistGrid,
    hist: Vec<Vec<f64>>,
    mode_weight: Vec<f64>,
    total: f64,
    outside: f64,
}

impl OccupationAccumulator {
    pub fn new(grid: HistGrid, n_modes: usize) -> Self {
        let cells = grid.n_cells();
        OccupationAccumulator {
            grid,
            hist: vec![vec![0.0; cells]; n_modes],
            mode_weight: vec![0.0; n_modes],
            total: 0.0,
            outside: 0.0,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.hist.len()
    }

    #[inline]
    pub fn deposit(&mut self, mode: usize, x: &Vector2<f64>, w: f64) {
        self.total += w;
        self.mode_weight[mode] += w;
        match self.grid.index(x) {
            Some(k) => self.hist[mode][k] += w,
            None => self.outside += w,
        }
    }

    /// Project a two-dimensional accumulator onto one axis.
    pub fn marginal(&self, axis: usize) -> Result<OccupationAccumulator, PdmpError> {
        if self.grid.dim != 2 || axis > 1 {
            return Err(PdmpError::InvalidGrid(format!(
                "cannot take axis {axis} marginal of a {}-dimensional grid",
                self.grid.dim
            )));
        }
        let g = &self.grid;
        let grid = HistGrid {
            dim: 1,
            lower: [g.lower[axis], 0.0],
            upper: [g.upper[axis], 1.0],
            bins: g.bins,
            periodic: g.periodic,
        };
        let n = g.bins;
        let hist = self
            .hist
            .iter()
            .map(|h| {
                let mut out = vec![0.0; n];
                for (idx, w) in h.iter().enumerate() {
                    out[if axis == 0 { idx / n } else { idx % n }] += w;
                }
                out
            })
            .collect();
        Ok(OccupationAccumulator {
            grid,
            hist,
            mode_weight: self.mode_weight.clone(),
            total: self.total,
            outside: self.outside,
        })
    }

    /// Add another accumulator on the same grid.
    pub fn merge(&mut self, other: &OccupationAccumulator) -> Result<(), PdmpError> {
        if other.grid != self.grid || other.n_modes() != self.n_modes() {
            return Err(PdmpError::InvalidGrid("merging accumulators on different grids".into()));
        }
        for (a, b) in self.hist.iter_mut().zip(&other.hist) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.mode_weight.iter_mut().zip(&other.mode_weight) {
            *a += b;
        }
        self.total += other.total;
        self.outside += other.outside;
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn outside(&self) -> f64 {
        self.outside
    }

    pub fn mode_weights(&self) -> &[f64] {
        &self.mode_weight
    }

    /// Mode marginal as probabilities.
    pub fn mode_marginal(&self) -> Vec<f64> {
        self.mode_weight.iter().map(|w| w / self.total).collect()
    }

    /// Raw bin weights of one mode.
    pub fn weights(&self, mode: usize) -> &[f64] {
        &self.hist[mode]
    }

    /// Bin masses of one mode normalized by the total weight.
    pub fn masses(&self, mode: usize) -> Vec<f64> {
        self.hist[mode].iter().map(|w| w / self.total).collect()
    }

    /// Bin masses summed over modes.
    pub fn total_masses(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.n_cells()];
        for h in &self.hist {
            for (o, w) in out.iter_mut().zip(h) {
                *o += w / self.total;
            }
        }
        out
    }

    /// Density values (mass per cell volume) of one mode.
    pub fn density(&self, mode: usize) -> Vec<f64> {
        let v = self.grid.cell_volume();
        self.masses(mode).into_iter().map(|m| m / v).collect()
    }

    /// L1 distance between the joint (mode, cell) distributions.
    pub fn l1_distance(&self, other: &OccupationAccumulator) -> f64 {
        (0..self.n_modes())
            .map(|i| l1(&self.masses(i), &other.masses(i)))
            .sum()
    }

    /// L1 distance between the mode-summed distributions.
    pub fn l1_distance_total(&self, other: &OccupationAccumulator) -> f64 {
        l1(&self.total_masses(), &other.total_masses())
    }
}

pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}
