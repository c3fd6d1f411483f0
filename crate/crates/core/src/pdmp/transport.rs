use std::f64::consts::FRAC_PI_2;

use nalgebra::Vector2;

use super::{Characteristics, HistGrid, PdmpError, Rates};
use crate::geometry::FieldSpec;

/// Nodes of the double-exponential grid used by the transport solver.
const TRANSPORT_NODES: usize = 40_001;
/// Relative distance from the support endpoints where the grid stops.
const ENDPOINT_CUTOFF: f64 = 1e-12;

/// Stationary densities of a two-mode PDMP on an interval with constant rates.
///
/// Solves `(F_0 ρ_0)' = α_10 ρ_1 − α_01 ρ_0` and `(F_1 ρ_1)' = α_01 ρ_0 − α_10 ρ_1`
/// with zero total flux, which reduces to one linear ODE for `u = F_0 ρ_0`.
/// The support is the interval between the zeros of the two fields. A
/// double-exponential change of variables absorbs the power-law behavior at
/// the endpoints.
#[derive(Clone, Debug)]
pub struct TransportSolution {
    pub support: (f64, f64),
    /// Zero of each mode's field.
    pub zeros: [f64; 2],
    /// Mode `i` density behaves like `|x - zeros[i]|^β_i` near its zero, with
    /// `β_i = a_i / |F_i'(zeros[i])| - 1`.
    pub endpoint_exponents: [f64; 2],
    tau: Vec<f64>,
    log_u: Vec<f64>,
    cum: [Vec<f64>; 2],
    fields: [FieldSpec; 2],
    scale: f64,
}

fn zero_of(field: &FieldSpec, lo: f64, hi: f64) -> Option<f64> {
    let f = |x: f64| field.value(&Vector2::new(x, 0.0))[0];
    let n = 4096;
    let mut prev = (lo, f(lo));
    for k in 1..=n {
        let x = lo + (hi - lo) * k as f64 / n as f64;
        let v = f(x);
        if v == 0.0 {
            return Some(x);
        }
        if prev.1 * v < 0.0 {
            let (mut a, mut b) = (prev.0, x);
            let fa = prev.1;
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                if f(m) * fa > 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            return Some(0.5 * (a + b));
        }
        prev = (x, v);
    }
    None
}

impl TransportSolution {
    pub fn solve(ch: &Characteristics) -> Result<Self, PdmpError> {
        let bad = |m: &str| Err(PdmpError::InvalidCharacteristics(format!("transport solver: {m}")));
        if ch.dim() != 1 || ch.space.is_torus() || ch.n_modes() != 2 {
            return bad("needs two modes on an interval");
        }
        let (a01, a10) = match &ch.rates {
            Rates::Constant(a) => (a[(0, 1)], a[(1, 0)]),
            Rates::StateDependent(_) => return bad("needs constant rates"),
        };
        if !(a01 > 0.0 && a10 > 0.0) {
            return bad("needs positive rates");
        }
        let (blo, bhi) = ch.space.bounds();
        let fields = [ch.modes[0].clone(), ch.modes[1].clone()];
        let z0 = zero_of(&fields[0], blo[0], bhi[0]);
        let z1 = zero_of(&fields[1], blo[0], bhi[0]);
        let (z0, z1) = match (z0, z1) {
            (Some(a), Some(b)) if a != b => (a, b),
            _ => return bad("each field needs a distinct zero in the interval"),
        };
        let (lo, hi) = (z0.min(z1), z0.max(z1));
        let len = hi - lo;
        let eval = |i: usize, x: f64| fields[i].value(&Vector2::new(x, 0.0))[0];
        let mid = 0.5 * (lo + hi);
        if eval(0, mid) * eval(1, mid) >= 0.0 {
            return bad("fields must point in opposite directions inside the support");
        }

        let eps = ENDPOINT_CUTOFF * (len + lo.abs() + hi.abs());
        let w_max = 0.5 * (len / eps).ln();
        let t_max = (w_max / FRAC_PI_2).asinh();
        let n = TRANSPORT_NODES;
        let dt = 2.0 * t_max / (n - 1) as f64;
        let tau: Vec<f64> = (0..n).map(|k| -t_max + k as f64 * dt).collect();
        let mut xs = Vec::with_capacity(n);
        let mut jac = Vec::with_capacity(n);
        for &t in &tau {
            let w = FRAC_PI_2 * t.sinh();
            let dlo = len / (1.0 + (-2.0 * w).exp());
            let dhi = len / (1.0 + (2.0 * w).exp());
            xs.push(if dlo < dhi { lo + dlo } else { hi - dhi });
            jac.push(len * FRAC_PI_2 * t.cosh() / (2.0 * w.cosh().powi(2)));
        }
        let g: Vec<f64> = xs
            .iter()
            .zip(&jac)
            .map(|(&x, &j)| -(a01 / eval(0, x) + a10 / eval(1, x)) * j)
            .collect();
        let c = n / 2;
        let mut log_u = vec![0.0; n];
        for k in c + 1..n {
            log_u[k] = log_u[k - 1] + 0.5 * dt * (g[k - 1] + g[k]);
        }
        for k in (0..c).rev() {
            log_u[k] = log_u[k + 1] - 0.5 * dt * (g[k + 1] + g[k]);
        }
        let peak = log_u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for v in &mut log_u {
            *v -= peak;
        }
        let mut cum = [vec![0.0; n], vec![0.0; n]];
        for (i, cum_i) in cum.iter_mut().enumerate() {
            let dens: Vec<f64> = (0..n)
                .map(|k| log_u[k].exp() / eval(i, xs[k]).abs() * jac[k])
                .collect();
            // Power-law tails beyond the cutoff, with exponents read off the
            // first two nodes at each end.
            let tail = |k0: usize, k1: usize, d0: f64, d1: f64| {
                let r0 = dens[k0] / jac[k0];
                let beta = (r0 / (dens[k1] / jac[k1])).ln() / (d0 / d1).ln();
                if beta > -1.0 {
                    r0 * d0 / (beta + 1.0)
                } else {
                    0.0
                }
            };
            cum_i[0] = tail(0, 1, xs[0] - lo, xs[1] - lo);
            for k in 1..n {
                cum_i[k] = cum_i[k - 1] + 0.5 * dt * (dens[k - 1] + dens[k]);
            }
            cum_i[n - 1] += tail(n - 1, n - 2, hi - xs[n - 1], hi - xs[n - 2]);
        }
        let total = cum[0][n - 1] + cum[1][n - 1];
        for cum_i in &mut cum {
            for v in cum_i.iter_mut() {
                *v /= total;
            }
        }
        let slope = |i: usize, z: f64| fields[i].jacobian(&Vector2::new(z, 0.0))[(0, 0)].abs();
        let endpoint_exponents = [a01 / slope(0, z0) - 1.0, a10 / slope(1, z1) - 1.0];
        Ok(TransportSolution {
            support: (lo, hi),
            zeros: [z0, z1],
            endpoint_exponents,
            tau,
            log_u,
            cum,
            fields,
            scale: total,
        })
    }

    /// Smallest `k` whose `k`-th derivative blows up at an endpoint, or `None`
    /// when both endpoint behaviors are polynomial.
    pub fn first_singular_order(&self) -> Option<usize> {
        self.endpoint_exponents
            .iter()
            .filter(|b| !(**b >= 0.0 && (**b - b.round()).abs() < 1e-9))
            .map(|b| if *b < 0.0 { 0 } else { b.floor() as usize + 1 })
            .min()
    }

    fn tau_of(&self, x: f64) -> f64 {
        let (lo, hi) = self.support;
        let t_max = *self.tau.last().unwrap();
        if x <= lo {
            return -t_max;
        }
        if x >= hi {
            return t_max;
        }
        let s = 2.0 * (x - lo) / (hi - lo) - 1.0;
        (s.atanh() / FRAC_PI_2).asinh().clamp(-t_max, t_max)
    }

    fn interp(&self, v: &[f64], t: f64) -> f64 {
        let t0 = self.tau[0];
        let dt = self.tau[1] - t0;
        let s = (t - t0) / dt;
        let k = (s.floor() as usize).min(self.tau.len() - 2);
        let f = s - k as f64;
        v[k] * (1.0 - f) + v[k + 1] * f
    }

    /// Mass of mode `i` in `(-∞, x]`.
    pub fn cumulative(&self, mode: usize, x: f64) -> f64 {
        let (lo, hi) = self.support;
        if x <= lo {
            0.0
        } else if x >= hi {
            *self.cum[mode].last().unwrap()
        } else {
            self.interp(&self.cum[mode], self.tau_of(x))
        }
    }

    /// Mode weights `π_i`.
    pub fn mode_weights(&self) -> [f64; 2] {
        [*self.cum[0].last().unwrap(), *self.cum[1].last().unwrap()]
    }

    /// Pointwise density of mode `i`, normalized jointly over both modes.
    pub fn density(&self, mode: usize, x: f64) -> f64 {
        let (lo, hi) = self.support;
        if x <= lo || x >= hi {
            return 0.0;
        }
        let lu = self.interp(&self.log_u, self.tau_of(x));
        let f = self.fields[mode].value(&Vector2::new(x, 0.0))[0];
        lu.exp() / f.abs() / self.scale
    }

    /// Exact bin masses per mode on a 1D histogram grid.
    pub fn bin_masses(&self, grid: &HistGrid) -> Result<[Vec<f64>; 2], PdmpError> {
        if grid.dim != 1 {
            return Err(PdmpError::InvalidGrid("transport masses need a 1D grid".into()));
        }
        let edge = |k: usize| grid.lower[0] + (grid.upper[0] - grid.lower[0]) * k as f64 / grid.bins as f64;
        let mut out = [Vec::with_capacity(grid.bins), Vec::with_capacity(grid.bins)];
        for (mode, o) in out.iter_mut().enumerate() {
            let mut prev = self.cumulative(mode, edge(0));
            for k in 1..=grid.bins {
                let c = self.cumulative(mode, edge(k));
                o.push(c - prev);
                prev = c;
            }
        }
        Ok(out)
    }
}
