use std::fmt::Write as _;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::{BinMask, DensityError, EmpiricalDensity, Level};
use crate::geometry::Point;

/// Axis-aligned box in state coordinates. On periodic grids it may extend
/// past `[0,1)` and wraps around.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Union of boxes and anchor points. A cell belongs to the region when it
/// overlaps a box or contains an anchor; anchors therefore zoom in with the
/// resolution. With neither, the region is the whole grid.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    #[serde(default)]
    pub boxes: Vec<RegionBox>,
    #[serde(default)]
    pub anchors: Vec<Vec<f64>>,
}

impl Region {
    /// The whole grid.
    pub fn all() -> Self {
        Region::default()
    }

    pub fn anchored(p: &[f64]) -> Self {
        Region {
            anchors: vec![p.to_vec()],
            ..Region::default()
        }
    }

    pub fn boxed(lower: &[f64], upper: &[f64]) -> Self {
        Region {
            boxes: vec![RegionBox {
                lower: lower.to_vec(),
                upper: upper.to_vec(),
            }],
            ..Region::default()
        }
    }

    fn overlaps(&self, c: &[f64; 2], half: &[f64; 2], dim: usize, periodic: bool) -> bool {
        self.boxes.iter().any(|b| {
            (0..dim).all(|d| {
                let hit = |x: f64| x + half[d] > b.lower[d] && x - half[d] < b.upper[d];
                if periodic {
                    [-1.0, 0.0, 1.0].iter().any(|s| hit(c[d] + s))
                } else {
                    hit(c[d])
                }
            })
        })
    }

    /// Cells of `level` that overlap the region.
    pub fn cells(&self, level: &Level) -> Vec<usize> {
        let g = &level.grid;
        let w = level.widths();
        if self.boxes.is_empty() && self.anchors.is_empty() {
            return (0..g.n_cells()).collect();
        }
        let half = [0.5 * w[0], 0.5 * w[1]];
        let mut cells: Vec<usize> = (0..g.n_cells())
            .filter(|&i| self.overlaps(&g.center(i), &half, g.dim, g.periodic))
            .collect();
        for a in &self.anchors {
            let v = Vector2::new(a[0], a.get(1).copied().unwrap_or(0.0));
            if let Some(k) = g.index(&v) {
                cells.push(k);
            }
        }
        cells.sort_unstable();
        cells.dedup();
        cells
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    BoundedStable,
    Diverging,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::BoundedStable => "BoundedStable",
            Verdict::Diverging => "Diverging",
            Verdict::Inconclusive => "Inconclusive",
        }
    }
}

/// Growth-ratio thresholds for smoothness verdicts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerdictThresholds {
    /// Ratios at or below this (on every step) read as bounded.
    pub bounded_max: f64,
    /// Ratios above this (on every step) read as diverging.
    pub diverging_min: f64,
    /// A level is noise-dominated when its split-half noise exceeds this
    /// fraction of the signal.
    pub noise_fraction: f64,
}

impl Default for VerdictThresholds {
    fn default() -> Self {
        VerdictThresholds {
            bounded_max: 1.2,
            diverging_min: 1.25,
            noise_fraction: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoothnessReport {
    pub k: usize,
    pub resolutions: Vec<usize>,
    /// Sup over the region and all modes of the k-th difference quotient.
    pub sups: Vec<f64>,
    /// Same statistic for half the split-half difference, when available.
    pub noise: Option<Vec<f64>>,
    pub ratios: Vec<f64>,
    pub verdict: Verdict,
}

impl SmoothnessReport {
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:.6e}")).collect::<Vec<_>>().join(",");
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(
            s,
            "resolutions = {}",
            self.resolutions.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(",")
        );
        let _ = writeln!(s, "sups = {}", join(&self.sups));
        if let Some(n) = &self.noise {
            let _ = writeln!(s, "noise = {}", join(n));
        }
        let _ = writeln!(s, "ratios = {}", join(&self.ratios));
        let _ = writeln!(s, "verdict = {}", self.verdict.as_str());
        s
    }
}

fn binom(k: usize, j: usize) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * (k - i) as f64 / (i + 1) as f64)
}

/// Sup of `|Δ_h^k f| / h^k` along every axis, for stencils anchored at the
/// selected cells. Stencils are centered and shifted inward on bounded grids.
fn difference_sup(level: &Level, values: &[Vec<f64>], cells: &[usize], k: usize) -> f64 {
    let g = &level.grid;
    let n = g.bins as i64;
    let h = level.widths();
    let coef: Vec<f64> = (0..=k)
        .map(|j| if (k - j).is_multiple_of(2) { binom(k, j) } else { -binom(k, j) })
        .collect();
    let mut sup: f64 = 0.0;
    for v in values {
        for &idx in cells {
            let pos = if g.dim == 1 {
                [idx as i64, 0]
            } else {
                [(idx / g.bins) as i64, (idx % g.bins) as i64]
            };
            for axis in 0..g.dim {
                let mut start = pos[axis] - (k as i64) / 2;
                if !g.periodic {
                    if k as i64 >= n {
                        continue;
                    }
                    start = start.clamp(0, n - 1 - k as i64);
                }
                let mut acc = 0.0;
                for (j, c) in coef.iter().enumerate() {
                    let mut p = pos;
                    p[axis] = (start + j as i64).rem_euclid(n);
                    let flat = if g.dim == 1 { p[0] } else { p[0] * n + p[1] } as usize;
                    acc += c * v[flat];
                }
                sup = sup.max(acc.abs() / h[axis].powi(k as i32));
            }
        }
    }
    sup
}

/// k-th finite-difference stability of the density over `region`.
pub fn smoothness_probe(
    d: &EmpiricalDensity,
    k: usize,
    region: &Region,
    thresholds: &VerdictThresholds,
) -> Result<SmoothnessReport, DensityError> {
    if k > 3 {
        return Err(DensityError::OrderTooHigh(k));
    }
    if d.levels.len() < 3 {
        return Err(DensityError::BadLadder("smoothness needs at least three levels".into()));
    }
    let mut sups = Vec::new();
    let mut noise = d.halves.as_ref().map(|_| Vec::new());
    for (li, level) in d.levels.iter().enumerate() {
        let cells = region.cells(level);
        if cells.is_empty() {
            return Err(DensityError::RegionEmpty(level.bins()));
        }
        sups.push(difference_sup(level, &level.density, &cells, k));
        if let (Some(halves), Some(noise)) = (&d.halves, noise.as_mut()) {
            let diff: Vec<Vec<f64>> = halves[0][li]
                .density
                .iter()
                .zip(&halves[1][li].density)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| 0.5 * (x - y)).collect())
                .collect();
            noise.push(difference_sup(level, &diff, &cells, k));
        }
    }
    let ratios: Vec<f64> = sups.windows(2).map(|w| w[1] / w[0]).collect();
    let scale = d.levels[0]
        .density
        .iter()
        .flatten()
        .fold(0.0f64, |a, b| a.max(b.abs()));
    let verdict = if sups.iter().all(|&s| s <= 1e-9 * scale.max(1e-300)) {
        Verdict::BoundedStable
    } else if noise
        .as_ref()
        .is_some_and(|n| n.iter().zip(&sups).any(|(n, s)| *n > thresholds.noise_fraction * s))
    {
        Verdict::Inconclusive
    } else {
        let last = &ratios[ratios.len() - 2..];
        if last.iter().all(|&r| r > thresholds.diverging_min) {
            Verdict::Diverging
        } else if last.iter().all(|&r| r <= thresholds.bounded_max) {
            Verdict::BoundedStable
        } else {
            Verdict::Inconclusive
        }
    };
    Ok(SmoothnessReport {
        k,
        resolutions: d.resolutions(),
        sups,
        noise,
        ratios,
        verdict,
    })
}

/// Growth factor per refinement at or above which a point is flagged.
pub const BLOWUP_FACTOR: f64 = 1.5;

#[derive(Clone, Debug, PartialEq)]
pub struct BlowupReport {
    pub point: Point,
    pub mode: usize,
    pub resolutions: Vec<usize>,
    /// Density of a centered cell of each level's width.
    pub values: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Least-squares slope of `log ρ` against `log N`.
    pub exponent: f64,
    pub flagged: bool,
}

impl BlowupReport {
    pub fn to_kv(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:.6e}")).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let _ = writeln!(s, "point = {}", join(self.point.coords()));
        let _ = writeln!(s, "mode = {}", self.mode);
        let _ = writeln!(s, "values = {}", join(&self.values));
        let _ = writeln!(s, "ratios = {}", join(&self.ratios));
        let _ = writeln!(s, "exponent = {:.6}", self.exponent);
        let _ = writeln!(s, "blowup = {}", self.flagged);
        s
    }
}

/// Mean density of `mode` over the box `[p − w/2, p + w/2]`, computed from
/// the cells of `level` with fractional overlaps.
fn centered_mean(level: &Level, mode: usize, p: &[f64; 2], w: &[f64; 2]) -> f64 {
    let g = &level.grid;
    let h = level.widths();
    let n = g.bins as i64;
    let axis_overlaps = |d: usize| -> Vec<(i64, f64)> {
        if d >= g.dim {
            return vec![(0, 1.0)];
        }
        let (lo, hi) = (p[d] - 0.5 * w[d], p[d] + 0.5 * w[d]);
        let first = ((lo - g.lower[d]) / h[d]).floor() as i64;
        let last = ((hi - g.lower[d]) / h[d]).ceil() as i64;
        (first..last)
            .filter_map(|k| {
                let a = g.lower[d] + k as f64 * h[d];
                let len = (hi.min(a + h[d]) - lo.max(a)).max(0.0);
                let k = if g.periodic {
                    k.rem_euclid(n)
                } else if (0..n).contains(&k) {
                    k
                } else {
                    return None;
                };
                (len > 0.0).then_some((k, len / w[d]))
            })
            .collect()
    };
    let (xs, ys) = (axis_overlaps(0), axis_overlaps(1));
    let mut acc = 0.0;
    for &(i, fx) in &xs {
        for &(j, fy) in &ys {
            let idx = if g.dim == 1 { i } else { i * n + j } as usize;
            acc += fx * fy * level.density[mode][idx];
        }
    }
    acc
}

/// Track the density at `p` in `mode` across the ladder.
///
/// At resolution `N` the value is the mean density over a window two cells
/// of that level wide, centered on `p` and read off the finest level. The
/// sequence stays self-similar when `p` sits on a grid node or a cusp of the
/// support.
pub fn blowup_at(d: &EmpiricalDensity, p: &Point, mode: usize) -> Result<BlowupReport, DensityError> {
    if mode >= d.n_modes() {
        return Err(DensityError::BadMode(mode));
    }
    let fine = d.finest();
    let pc = [p[0], if p.dim() == 2 { p[1] } else { 0.0 }];
    if fine.grid.index(&Vector2::new(pc[0], pc[1])).is_none() {
        return Err(DensityError::OutsideGrid(p.coords().to_vec()));
    }
    let values: Vec<f64> = d
        .levels
        .iter()
        .map(|l| {
            let h = l.widths();
            centered_mean(fine, mode, &pc, &[2.0 * h[0], 2.0 * h[1]])
        })
        .collect();
    let ratios: Vec<f64> = values
        .windows(2)
        .map(|w| match (w[0] > 0.0, w[1] > 0.0) {
            (true, _) => w[1] / w[0],
            (false, true) => f64::INFINITY,
            (false, false) => 1.0,
        })
        .collect();
    let xs: Vec<f64> = d.levels.iter().map(|l| (l.bins() as f64).ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let exponent = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let flagged = !ratios.is_empty() && ratios.iter().all(|&r| r >= BLOWUP_FACTOR);
    Ok(BlowupReport {
        point: *p,
        mode,
        resolutions: d.resolutions(),
        values,
        ratios,
        exponent,
        flagged,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SupportEstimate {
    pub masks: Vec<BinMask>,
    /// Largest `|A Δ B| / |A ∪ B|` over pairs of modes.
    pub max_symmetric_difference: f64,
}

impl SupportEstimate {
    pub fn union(&self) -> BinMask {
        let mut out = self.masks[0].clone();
        for m in &self.masks[1..] {
            for (a, b) in out.cells.iter_mut().zip(&m.cells) {
                *a |= *b;
            }
        }
        out
    }
}

/// Cells holding more than `threshold` of their mode's mass, on the finest level.
pub fn support_estimate(d: &EmpiricalDensity, threshold: f64) -> Result<SupportEstimate, DensityError> {
    support_estimate_at(d, threshold, d.levels.len() - 1)
}

pub fn support_estimate_at(
    d: &EmpiricalDensity,
    threshold: f64,
    level: usize,
) -> Result<SupportEstimate, DensityError> {
    if !(threshold > 0.0) {
        return Err(DensityError::BadThreshold(threshold));
    }
    let l = d.levels.get(level).ok_or(DensityError::BadLadder(format!("no level {level}")))?;
    let vol = l.grid.cell_volume();
    let masks: Vec<BinMask> = l
        .density
        .iter()
        .map(|dens| {
            let total: f64 = dens.iter().sum::<f64>() * vol;
            let cells = dens
                .iter()
                .map(|v| total > 0.0 && v * vol / total > threshold)
                .collect();
            BinMask {
                dim: l.grid.dim,
                bins: l.grid.bins,
                periodic: l.grid.periodic,
                cells,
            }
        })
        .collect();
    let mut worst: f64 = 0.0;
    for i in 0..masks.len() {
        for j in i + 1..masks.len() {
            worst = worst.max(masks[i].symmetric_difference(&masks[j])?);
        }
    }
    Ok(SupportEstimate {
        masks,
        max_symmetric_difference: worst,
    })
}
