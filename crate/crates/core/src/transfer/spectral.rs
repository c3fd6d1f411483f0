use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::grid::difference_sups;
use super::model::apply_with;
use super::{ck_seminorm, CircleMapModel, GridFunction, TransferError};
use crate::rng;

/// Shortest tail window accepted for the geometric mean.
pub const MIN_WINDOW: usize = 5;

/// Power-iteration estimate of the spectral radius on the grid `C^k` space.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralEstimate {
    pub k: usize,
    /// Per-iteration seminorm ratios of the winning probe.
    pub growth: Vec<f64>,
    pub radius: f64,
    /// Iterations `start..end` (1-based, end exclusive) averaged for `radius`.
    pub window: (usize, usize),
    /// Radius found by each probe, in probe order.
    pub probe_radii: Vec<f64>,
    /// Whether the window lies in the stretch where the order-`k` differences
    /// of the iterates are still resolved by the grid.
    pub resolved: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralOpts {
    pub n: usize,
    pub n_iter: usize,
    pub n_probes: usize,
    pub seed: u64,
    /// Largest relative change of the order-`k` difference sup between step
    /// `h` and step `2h` for an iterate to count as resolved.
    pub resolution_tol: f64,
}

impl Default for SpectralOpts {
    fn default() -> Self {
        SpectralOpts {
            n: 2048,
            n_iter: 40,
            n_probes: 5,
            seed: 0,
            resolution_tol: 0.25,
        }
    }
}

/// Probe `index`: the constant, `sin 2πx`, `cos 2πx`, then seeded random
/// trigonometric polynomials with `1/m²` decay over modes `1..=8`.
pub fn probe(index: usize, n: usize, seed: u64) -> Result<GridFunction, TransferError> {
    match index {
        0 => GridFunction::constant(n, 1.0),
        1 => GridFunction::from_fn(n, |x| (2.0 * PI * x).sin()),
        2 => GridFunction::from_fn(n, |x| (2.0 * PI * x).cos()),
        _ => {
            let mut r = rng::stream(seed, index as u64);
            let coef: Vec<(f64, f64)> = (1..=8)
                .map(|m| {
                    let s = 1.0 / (m * m) as f64;
                    (
                        s * r.sample::<f64, _>(StandardNormal),
                        s * r.sample::<f64, _>(StandardNormal),
                    )
                })
                .collect();
            let c0: f64 = r.sample(StandardNormal);
            GridFunction::from_fn(n, |x| {
                c0 + coef
                    .iter()
                    .enumerate()
                    .map(|(i, (a, b))| {
                        let arg = 2.0 * PI * (i + 1) as f64 * x;
                        a * arg.cos() + b * arg.sin()
                    })
                    .sum::<f64>()
            })
        }
    }
}

/// Whether the order-`k` difference sup is stable between steps `h` and `2h`.
fn resolved(rho: &GridFunction, k: usize, tol: f64) -> bool {
    if k == 0 {
        return true;
    }
    let fine = difference_sups(rho.values(), k, 1)[k];
    let coarse = difference_sups(rho.values(), k, 2)[k];
    fine == 0.0 || (fine - coarse).abs() <= tol * fine
}

struct ProbeRun {
    ratios: Vec<f64>,
    resolved: Vec<bool>,
}

fn run_probe(
    br: &super::model::Branches,
    mut rho: GridFunction,
    k: usize,
    n_iter: usize,
    index: usize,
    tol: f64,
) -> Result<ProbeRun, TransferError> {
    let norm0 = ck_seminorm(&rho, k)?;
    rho.scale(1.0 / norm0);
    let mut ratios = Vec::with_capacity(n_iter);
    let mut flags = Vec::with_capacity(n_iter);
    for it in 1..=n_iter {
        let next = apply_with(br, &rho);
        let norm = ck_seminorm(&next, k)?;
        if !(norm > 1e-300) {
            return Err(TransferError::Underflow {
                probe: index,
                iteration: it,
            });
        }
        ratios.push(norm);
        rho = next;
        rho.scale(1.0 / norm);
        flags.push(resolved(&rho, k, tol));
    }
    Ok(ProbeRun {
        ratios,
        resolved: flags,
    })
}

/// Pick the averaging window: the last `max(MIN_WINDOW, len/2)` iterations of
/// the leading resolved stretch, or the last `MIN_WINDOW` iterations when
/// that stretch is too short.
fn choose_window(flags: &[bool]) -> ((usize, usize), bool) {
    let n = flags.len();
    let lead = flags.iter().take_while(|f| **f).count();
    if lead > MIN_WINDOW {
        let len = (lead / 2).max(MIN_WINDOW);
        ((lead - len + 1, lead + 1), true)
    } else {
        ((n - MIN_WINDOW + 1, n + 1), false)
    }
}

fn geo_mean(r: &[f64], w: (usize, usize)) -> f64 {
    let s = &r[w.0 - 1..w.1 - 1];
    (s.iter().map(|v| v.ln()).sum::<f64>() / s.len() as f64).exp()
}

/// Estimate `𝓡(ℒ_φ, C^k)` by renormalized power iteration over probes.
pub fn spectral_radius(
    model: &CircleMapModel,
    k: usize,
    opts: &SpectralOpts,
) -> Result<SpectralEstimate, TransferError> {
    if opts.n_iter < 20 {
        return Err(TransferError::InvalidInput("n_iter must be at least 20".into()));
    }
    if opts.n_probes < 3 {
        return Err(TransferError::InvalidInput("n_probes must be at least 3".into()));
    }
    let br = model.branches(opts.n)?;
    let runs: Vec<ProbeRun> = (0..opts.n_probes)
        .into_par_iter()
        .map(|i| {
            let p = probe(i, opts.n, opts.seed)?;
            run_probe(&br, p, k, opts.n_iter, i, opts.resolution_tol)
        })
        .collect::<Result<_, _>>()?;
    let mut best: Option<(f64, usize, (usize, usize), bool)> = None;
    let mut probe_radii = Vec::with_capacity(runs.len());
    for (i, run) in runs.iter().enumerate() {
        let (w, ok) = choose_window(&run.resolved);
        let r = geo_mean(&run.ratios, w);
        probe_radii.push(r);
        if best.is_none_or(|b| r > b.0) {
            best = Some((r, i, w, ok));
        }
    }
    let (radius, i, window, ok) = best.expect("at least three probes");
    Ok(SpectralEstimate {
        k,
        growth: runs[i].ratios.clone(),
        radius,
        window,
        probe_radii,
        resolved: ok,
    })
}
