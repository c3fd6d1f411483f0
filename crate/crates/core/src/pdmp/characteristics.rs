use std::f64::consts::PI;

use nalgebra::{DMatrix, Vector2};
use serde::{Deserialize, Serialize};

use super::PdmpError;
use crate::ergodic::space_grid;
use crate::geometry::{FieldSpec, IntegratorOpts, Space};

/// Safety factor applied to grid suprema of state-dependent rates.
pub const RATE_SAFETY: f64 = 1.05;
/// Default ratio between the intensity bound and the largest row sum.
pub const ALPHA_MARGIN: f64 = 1.25;
/// Grid points per dimension used to bound state-dependent rates.
pub const RATE_GRID: usize = 64;

/// Catalog of switching-rate functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateFn {
    Constant { value: f64 },
    /// `base + amp·cos(2π(freq·x[axis] + phase))`, which must stay nonnegative.
    Trig {
        base: f64,
        amp: f64,
        #[serde(default)]
        axis: usize,
        #[serde(default = "one")]
        freq: f64,
        #[serde(default)]
        phase: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl RateFn {
    pub fn eval(&self, x: &Vector2<f64>) -> f64 {
        match self {
            RateFn::Constant { value } => *value,
            RateFn::Trig {
                base,
                amp,
                axis,
                freq,
                phase,
            } => base + amp * (2.0 * PI * (freq * x[*axis] + phase)).cos(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateEntry {
    pub from: usize,
    pub to: usize,
    pub rate: RateFn,
}

/// Switching rates `α_ij(x)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Rates {
    Constant(DMatrix<f64>),
    StateDependent(Vec<RateEntry>),
}

/// A PDMP specification: mode fields, rates and the intensity bound `α`.
#[derive(Clone, Debug)]
pub struct Characteristics {
    pub space: Space,
    pub modes: Vec<FieldSpec>,
    pub rates: Rates,
    pub alpha: f64,
    pub opts: IntegratorOpts,
    /// `sup_x max_i Σ_j α_ij(x)`, exact for constant rates and a padded grid
    /// estimate otherwise.
    pub rate_bound: f64,
    table: Vec<Vec<Vec<usize>>>,
}

impl Characteristics {
    /// Validate and build. `alpha = None` picks `ALPHA_MARGIN` times the rate
    /// bound. With `require_irreducible = false` the graph check is skipped,
    /// which is only meant for degenerate test setups.
    pub fn new(
        space: Space,
        modes: Vec<FieldSpec>,
        rates: Rates,
        alpha: Option<f64>,
        opts: IntegratorOpts,
        require_irreducible: bool,
    ) -> Result<Self, PdmpError> {
        let m = modes.len();
        if m == 0 {
            return Err(PdmpError::InvalidCharacteristics("no modes".into()));
        }
        space.validate()?;
        space.check_trapping(&modes)?;
        for f in &modes {
            if f.dim() != space.dim() {
                return Err(PdmpError::InvalidCharacteristics(format!(
                    "field of dimension {} on a space of dimension {}",
                    f.dim(),
                    space.dim()
                )));
            }
        }
        let mut table = vec![vec![Vec::new(); m]; m];
        match &rates {
            Rates::Constant(a) => {
                if a.shape() != (m, m) {
                    return Err(PdmpError::InvalidCharacteristics(format!(
                        "rate matrix must be {m}x{m}"
                    )));
                }
                for i in 0..m {
                    for j in 0..m {
                        let v = a[(i, j)];
                        if i != j && !(v >= 0.0 && v.is_finite()) {
                            return Err(PdmpError::InvalidCharacteristics(format!(
                                "rate ({i},{j}) = {v} is not a nonnegative number"
                            )));
                        }
                    }
                }
            }
            Rates::StateDependent(entries) => {
                for (k, e) in entries.iter().enumerate() {
                    if e.from >= m || e.to >= m || e.from == e.to {
                        return Err(PdmpError::InvalidCharacteristics(format!(
                            "rate entry {k} has invalid modes ({}, {})",
                            e.from, e.to
                        )));
                    }
                    table[e.from][e.to].push(k);
                }
            }
        }
        let grid: Vec<Vector2<f64>> = space_grid(&space, RATE_GRID).iter().map(|p| p.vec()).collect();
        let mut ch = Characteristics {
            space,
            modes,
            rates,
            alpha: 0.0,
            opts,
            rate_bound: 0.0,
            table,
        };
        let mut sup: f64 = 0.0;
        let mut positive = vec![vec![false; m]; m];
        for x in &grid {
            for i in 0..m {
                let mut row = 0.0;
                for j in 0..m {
                    if i == j {
                        continue;
                    }
                    let r = ch.rate(i, j, x);
                    if r < 0.0 {
                        return Err(PdmpError::InvalidCharacteristics(format!(
                            "rate ({i},{j}) is negative at {x:?}"
                        )));
                    }
                    positive[i][j] |= r > 0.0;
                    row += r;
                }
                sup = sup.max(row);
            }
        }
        ch.rate_bound = match ch.rates {
            Rates::Constant(_) => sup,
            Rates::StateDependent(_) => sup * RATE_SAFETY,
        };
        if require_irreducible && !strongly_connected(&positive) {
            return Err(PdmpError::Reducible);
        }
        ch.alpha = match alpha {
            Some(a) => {
                if !(a > ch.rate_bound) {
                    return Err(PdmpError::AlphaTooSmall {
                        alpha: a,
                        bound: ch.rate_bound,
                    });
                }
                a
            }
            None if ch.rate_bound > 0.0 => ALPHA_MARGIN * ch.rate_bound,
            None => 1.0,
        };
        Ok(ch)
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// `α_ij(x)` for `i ≠ j`.
    #[inline]
    pub fn rate(&self, i: usize, j: usize, x: &Vector2<f64>) -> f64 {
        match &self.rates {
            Rates::Constant(a) => a[(i, j)],
            Rates::StateDependent(entries) => self.table[i][j]
                .iter()
                .map(|&k| entries[k].rate.eval(x))
                .sum(),
        }
    }

    /// Draw the next mode from row `i` of `A(x)` given a uniform `u`.
    #[inline]
    pub fn pick_mode(&self, i: usize, x: &Vector2<f64>, u: f64) -> usize {
        let target = u * self.alpha;
        let mut acc = 0.0;
        for j in 0..self.n_modes() {
            if j == i {
                continue;
            }
            acc += self.rate(i, j, x);
            if target < acc {
                return j;
            }
        }
        i
    }

    /// Row `i` of the switching kernel `A(x)`.
    pub fn switch_row(&self, i: usize, x: &Vector2<f64>) -> Vec<f64> {
        let mut row: Vec<f64> = (0..self.n_modes())
            .map(|j| if j == i { 0.0 } else { self.rate(i, j, x) / self.alpha })
            .collect();
        row[i] = 1.0 - row.iter().sum::<f64>();
        row
    }

    /// Copy with every rate multiplied by `s` and `α` rescaled to match.
    pub fn scaled(&self, s: f64) -> Result<Self, PdmpError> {
        let rates = match &self.rates {
            Rates::Constant(a) => Rates::Constant(a * s),
            Rates::StateDependent(e) => Rates::StateDependent(
                e.iter()
                    .map(|r| RateEntry {
                        rate: match r.rate {
                            RateFn::Constant { value } => RateFn::Constant { value: value * s },
                            RateFn::Trig {
                                base,
                                amp,
                                axis,
                                freq,
                                phase,
                            } => RateFn::Trig {
                                base: base * s,
                                amp: amp * s,
                                axis,
                                freq,
                                phase,
                            },
                        },
                        ..r.clone()
                    })
                    .collect(),
            ),
        };
        Characteristics::new(
            self.space.clone(),
            self.modes.clone(),
            rates,
            Some(self.alpha * s),
            self.opts,
            false,
        )
    }
}

fn strongly_connected(adj: &[Vec<bool>]) -> bool {
    let m = adj.len();
    let reach = |start: usize, forward: bool| {
        let mut seen = vec![false; m];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            for j in 0..m {
                let edge = if forward { adj[i][j] } else { adj[j][i] };
                if edge && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(0, true) && reach(0, false)
}
