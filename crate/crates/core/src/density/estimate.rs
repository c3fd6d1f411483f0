use std::io::Write;

use super::DensityError;
use crate::pdmp::{HistGrid, OccupationAccumulator};

/// Per-mode densities on one grid of the ladder.
#[derive(Clone, Debug, PartialEq)]
pub struct Level {
    pub grid: HistGrid,
    /// `density[mode][cell]`, mass per unit volume normalized by the total weight.
    pub density: Vec<Vec<f64>>,
}

impl Level {
    pub fn bins(&self) -> usize {
        self.grid.bins
    }

    /// Cell width along each axis.
    pub fn widths(&self) -> [f64; 2] {
        let g = &self.grid;
        [
            (g.upper[0] - g.lower[0]) / g.bins as f64,
            (g.upper[1] - g.lower[1]) / g.bins as f64,
        ]
    }

    /// Mass of each mode on this level.
    pub fn mode_masses(&self) -> Vec<f64> {
        let v = self.grid.cell_volume();
        self.density.iter().map(|d| d.iter().sum::<f64>() * v).collect()
    }
}

/// Histogram densities on a dyadic ladder of resolutions.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalDensity {
    pub scenario: String,
    pub levels: Vec<Level>,
    /// Split-half estimates on the same ladder, used as a noise gauge.
    pub halves: Option<[Vec<Level>; 2]>,
    pub samples: f64,
    pub mode_weights: Vec<f64>,
}

fn coarsen(acc: &OccupationAccumulator, bins: usize) -> Result<Level, DensityError> {
    let fine = &acc.grid;
    if bins == 0 || !fine.bins.is_multiple_of(bins) {
        return Err(DensityError::BadLadder(format!(
            "{bins} bins do not divide the accumulator's {}",
            fine.bins
        )));
    }
    if !(acc.total() > 0.0) {
        return Err(DensityError::EmptyAccumulator);
    }
    let f = fine.bins / bins;
    let grid = HistGrid { bins, ..fine.clone() };
    let vol = grid.cell_volume();
    let cells = grid.n_cells();
    let density = (0..acc.n_modes())
        .map(|m| {
            let mut out = vec![0.0; cells];
            for (idx, w) in acc.weights(m).iter().enumerate() {
                let c = if fine.dim == 1 {
                    idx / f
                } else {
                    let (i, j) = (idx / fine.bins, idx % fine.bins);
                    (i / f) * bins + j / f
                };
                out[c] += w;
            }
            out.iter_mut().for_each(|v| *v /= acc.total() * vol);
            out
        })
        .collect();
    Ok(Level { grid, density })
}

fn check_ladder(ladder: &[usize]) -> Result<(), DensityError> {
    if ladder.is_empty() {
        return Err(DensityError::BadLadder("empty ladder".into()));
    }
    for w in ladder.windows(2) {
        if w[1] != 2 * w[0] {
            return Err(DensityError::BadLadder(format!(
                "{} -> {} is not a dyadic refinement",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// Normalized histograms of `acc` on each resolution of `ladder`.
///
/// Every level is coarsened from the accumulator's own grid, so all levels
/// carry the same samples.
pub fn estimate_density(
    acc: &OccupationAccumulator,
    ladder: &[usize],
    scenario: &str,
) -> Result<EmpiricalDensity, DensityError> {
    check_ladder(ladder)?;
    let levels = ladder
        .iter()
        .map(|&b| coarsen(acc, b))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EmpiricalDensity {
        scenario: scenario.to_string(),
        levels,
        halves: None,
        samples: acc.total(),
        mode_weights: acc.mode_marginal(),
    })
}

impl EmpiricalDensity {
    /// Attach split-half estimates so probes can gauge sampling noise.
    pub fn with_halves(mut self, a: &OccupationAccumulator, b: &OccupationAccumulator) -> Result<Self, DensityError> {
        let ladder: Vec<usize> = self.levels.iter().map(Level::bins).collect();
        let lv = |acc: &OccupationAccumulator| {
            ladder
                .iter()
                .map(|&n| coarsen(acc, n))
                .collect::<Result<Vec<_>, _>>()
        };
        self.halves = Some([lv(a)?, lv(b)?]);
        Ok(self)
    }

    pub fn n_modes(&self) -> usize {
        self.mode_weights.len()
    }

    pub fn dim(&self) -> usize {
        self.levels[0].grid.dim
    }

    pub fn resolutions(&self) -> Vec<usize> {
        self.levels.iter().map(Level::bins).collect()
    }

    pub fn finest(&self) -> &Level {
        self.levels.last().unwrap()
    }

    /// Rows `mode, x0[, x1], rho_<N>...` over the finest cells, each level
    /// reporting the density of the cell containing the fine cell center.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), DensityError> {
        let io = |e: csv::Error| DensityError::Io(e.to_string());
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["mode".to_string(), "x0".to_string()];
        if self.dim() == 2 {
            header.push("x1".into());
        }
        header.extend(self.levels.iter().map(|l| format!("rho_{}", l.bins())));
        out.write_record(&header).map_err(io)?;
        let fine = &self.finest().grid;
        for m in 0..self.n_modes() {
            for idx in 0..fine.n_cells() {
                let c = fine.center(idx);
                let mut row = vec![m.to_string(), format!("{:.10e}", c[0])];
                if self.dim() == 2 {
                    row.push(format!("{:.10e}", c[1]));
                }
                let p = nalgebra::Vector2::new(c[0], c[1]);
                for l in &self.levels {
                    let k = l.grid.index(&p).expect("fine centers lie inside the grid");
                    row.push(format!("{:.10e}", l.density[m][k]));
                }
                out.write_record(&row).map_err(io)?;
            }
        }
        out.flush().map_err(|e| DensityError::Io(e.to_string()))
    }
}
