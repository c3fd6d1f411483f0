use rayon::prelude::*;

use super::BracketError;
use crate::density::BinMask;
use crate::geometry::{flow_point, Point};
use crate::pdmp::{Characteristics, HistGrid};

/// Consecutive `dt` steps followed from a cell center.
pub const CHAIN_STEPS: usize = 10;

/// Grid approximation of the forward reachable set of a seed.
#[derive(Clone, Debug, PartialEq)]
pub struct ReachableMask {
    pub mask: BinMask,
    pub grid: HistGrid,
    pub seed: Point,
    /// Frontier sweeps performed.
    pub iterations: usize,
    /// Reachable cell count after each sweep, nondecreasing.
    pub history: Vec<usize>,
    /// True when the sweep cap stopped the iteration before a fixed point.
    pub capped: bool,
}

fn check_dt(dt: f64) -> Result<(), BracketError> {
    if !(dt > 0.0 && dt <= 0.1) {
        return Err(BracketError::InvalidInput(format!("dt = {dt} must lie in (0, 0.1]")));
    }
    Ok(())
}

/// Cells reachable from `x0` by switched trajectories.
///
/// Each sweep flows every mode from the centers of the cells found in the
/// previous sweep (the seed itself in the first) and marks the cells occupied
/// at times `dt, 2·dt, …, CHAIN_STEPS·dt`.
pub fn reachable_set(
    ch: &Characteristics,
    x0: &Point,
    grid_res: usize,
    dt: f64,
    max_iter: usize,
) -> Result<ReachableMask, BracketError> {
    check_dt(dt)?;
    let grid = HistGrid::for_space(&ch.space, grid_res);
    let dim = ch.dim();
    let mut mask = BinMask::new(dim, grid_res, grid.periodic);
    let start = grid
        .index(&x0.vec())
        .ok_or_else(|| BracketError::InvalidInput(format!("seed {:?} is outside the space", x0.coords())))?;
    mask.cells[start] = true;
    let center = |k: usize| {
        let c = grid.center(k);
        Point::from_vec(nalgebra::Vector2::new(c[0], c[1]), dim)
    };
    let mut frontier = vec![(start, *x0)];
    let mut history = vec![1];
    let mut iterations = 0;
    let mut capped = false;
    while !frontier.is_empty() {
        if iterations == max_iter {
            capped = true;
            break;
        }
        iterations += 1;
        let landed: Vec<Vec<usize>> = frontier
            .par_iter()
            .map(|(cell, p)| -> Result<Vec<usize>, BracketError> {
                let mut out = Vec::new();
                for field in &ch.modes {
                    let mut q = *p;
                    for _ in 0..CHAIN_STEPS {
                        q = flow_point(&ch.space, field, &q, dt, &ch.opts)?;
                        match grid.index(&q.vec()) {
                            Some(k) if k == *cell => {}
                            Some(k) => out.push(k),
                            None => break,
                        }
                    }
                }
                Ok(out)
            })
            .collect::<Result<_, _>>()?;
        let mut next = Vec::new();
        for k in landed.into_iter().flatten() {
            if !mask.cells[k] {
                mask.cells[k] = true;
                next.push((k, center(k)));
            }
        }
        frontier = next;
        history.push(mask.count());
    }
    Ok(ReachableMask {
        mask,
        grid,
        seed: *x0,
        iterations,
        history,
        capped,
    })
}

/// Intersection of reachable sets over several seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaEstimate {
    pub mask: BinMask,
    pub per_seed: Vec<ReachableMask>,
    /// Connected components of the intersection (8-neighborhood).
    pub components: usize,
    pub connected: bool,
    /// The intersection is empty, which is a legitimate outcome.
    pub empty: bool,
    pub any_capped: bool,
}

/// `n × n` (or `n` in 1D) seeds at cell centers of a coarse grid over the space.
pub fn spread_seeds(ch: &Characteristics, n: usize) -> Vec<Point> {
    let (lo, hi) = ch.space.bounds();
    let at = |d: usize, j: usize| lo[d] + (j as f64 + 0.5) / n as f64 * (hi[d] - lo[d]);
    if ch.dim() == 1 {
        (0..n).map(|j| Point::d1(at(0, j))).collect()
    } else {
        (0..n)
            .flat_map(|a| (0..n).map(move |b| (a, b)))
            .map(|(a, b)| Point::d2(at(0, a), at(1, b)))
            .collect()
    }
}

pub fn gamma_estimate(
    ch: &Characteristics,
    seeds: &[Point],
    grid_res: usize,
    dt: f64,
    max_iter: usize,
) -> Result<GammaEstimate, BracketError> {
    if seeds.len() < 4 {
        return Err(BracketError::InvalidInput(format!(
            "{} seeds given, at least 4 are needed",
            seeds.len()
        )));
    }
    let per_seed = seeds
        .iter()
        .map(|s| reachable_set(ch, s, grid_res, dt, max_iter))
        .collect::<Result<Vec<_>, _>>()?;
    let mut mask = per_seed[0].mask.clone();
    for r in &per_seed[1..] {
        for (a, b) in mask.cells.iter_mut().zip(&r.mask.cells) {
            *a &= *b;
        }
    }
    let components = count_components(&mask);
    Ok(GammaEstimate {
        empty: mask.count() == 0,
        connected: components == 1,
        components,
        any_capped: per_seed.iter().any(|r| r.capped),
        per_seed,
        mask,
    })
}

/// Number of 8-connected components, wrapping on periodic masks.
pub fn count_components(mask: &BinMask) -> usize {
    let mut seen = vec![false; mask.cells.len()];
    let mut count = 0;
    let mut nb = Vec::with_capacity(9);
    for start in 0..mask.cells.len() {
        if !mask.cells[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            mask.neighbors(i, &mut nb);
            for &j in &nb {
                if mask.cells[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    count
}
