use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use super::{Characteristics, HistGrid, OccupationAccumulator, PdmpError};
use crate::geometry::{flow_occupation, flow_point, Point};
use crate::rng::stream;

/// Stream ids at or above this offset feed the K-pushforward draws.
const PUSH_STREAM_OFFSET: u64 = 1 << 32;
/// Default split-half L1 threshold.
pub const SPLIT_TOL: f64 = 0.05;

/// State `(x, i)` of the embedded chain or the continuous process.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmbeddedState {
    pub x: Point,
    pub i: usize,
}

impl EmbeddedState {
    pub fn new(x: Point, i: usize) -> Self {
        EmbeddedState { x, i }
    }
}

fn exp_dist(alpha: f64) -> Exp<f64> {
    Exp::new(alpha).expect("alpha is positive by construction")
}

fn check_state(ch: &Characteristics, s: &EmbeddedState) -> Result<(), PdmpError> {
    if s.i >= ch.n_modes() {
        return Err(PdmpError::InvalidState(format!(
            "mode {} with only {} modes",
            s.i,
            ch.n_modes()
        )));
    }
    if s.x.dim() != ch.dim() {
        return Err(PdmpError::InvalidState(format!(
            "point of dimension {} in a space of dimension {}",
            s.x.dim(),
            ch.dim()
        )));
    }
    Ok(())
}

/// One step of the embedded chain `P = KA`.
pub fn embedded_step<R: Rng + ?Sized>(
    ch: &Characteristics,
    s: &EmbeddedState,
    rng: &mut R,
) -> Result<EmbeddedState, PdmpError> {
    check_state(ch, s)?;
    let t = exp_dist(ch.alpha).sample(rng);
    let x = flow_point(&ch.space, &ch.modes[s.i], &s.x, t, &ch.opts)?;
    let u: f64 = rng.random();
    let i = ch.pick_mode(s.i, &x.vec(), u);
    Ok(EmbeddedState { x, i })
}

/// Flow each sample for an independent `Exp(α)` time in its own mode.
pub fn k_pushforward<R: Rng + ?Sized>(
    ch: &Characteristics,
    samples: &[EmbeddedState],
    rng: &mut R,
) -> Result<Vec<EmbeddedState>, PdmpError> {
    let exp = exp_dist(ch.alpha);
    samples
        .iter()
        .map(|s| {
            check_state(ch, s)?;
            let t = exp.sample(rng);
            let x = flow_point(&ch.space, &ch.modes[s.i], &s.x, t, &ch.opts)?;
            Ok(EmbeddedState { x, i: s.i })
        })
        .collect()
}

/// Kind of a proposed event.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    Switch,
    Fictitious,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Switch => "switch",
            EventKind::Fictitious => "fictitious",
        }
    }
}

/// CSV stream of trajectory events: `t, mode, x0[, x1], kind`.
pub struct EventLog {
    writer: csv::Writer<Box<dyn Write>>,
    dim: usize,
}

impl EventLog {
    pub fn new(sink: Box<dyn Write>, dim: usize) -> Result<Self, PdmpError> {
        let mut writer = csv::Writer::from_writer(sink);
        let mut header = vec!["t", "mode", "x0"];
        if dim == 2 {
            header.push("x1");
        }
        header.push("kind");
        writer.write_record(&header).map_err(io_err)?;
        Ok(EventLog { writer, dim })
    }

    pub fn create(path: &Path, dim: usize) -> Result<Self, PdmpError> {
        let f = File::create(path).map_err(|e| PdmpError::Io(e.to_string()))?;
        EventLog::new(Box::new(BufWriter::new(f)), dim)
    }

    fn record(&mut self, t: f64, mode: usize, x: &Point, kind: EventKind) -> Result<(), PdmpError> {
        let mut row = vec![format!("{t:.12e}"), mode.to_string(), format!("{:.12e}", x[0])];
        if self.dim == 2 {
            row.push(format!("{:.12e}", x[1]));
        }
        row.push(kind.as_str().to_string());
        self.writer.write_record(&row).map_err(io_err)
    }

    pub fn flush(&mut self) -> Result<(), PdmpError> {
        self.writer.flush().map_err(|e| PdmpError::Io(e.to_string()))
    }
}

fn io_err(e: csv::Error) -> PdmpError {
    PdmpError::Io(e.to_string())
}

/// A completed stay in one mode between two real switches.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sojourn {
    pub mode: usize,
    pub duration: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySummary {
    pub final_state: EmbeddedState,
    pub t_end: f64,
    pub real_events: u64,
    pub fictitious_events: u64,
    /// Stays ended by a real switch, in order. The last, truncated stay is
    /// not included.
    pub sojourns: Vec<Sojourn>,
}

/// Flow for `tau` in the current mode, depositing occupation if asked.
fn segment(
    ch: &Characteristics,
    s: &EmbeddedState,
    tau: f64,
    acc: Option<&mut OccupationAccumulator>,
) -> Result<Point, PdmpError> {
    let field = &ch.modes[s.i];
    let x = match acc {
        Some(acc) => flow_occupation(&ch.space, field, &s.x, tau, &ch.opts, |p, w| {
            acc.deposit(s.i, p, w)
        })?,
        None => flow_point(&ch.space, field, &s.x, tau, &ch.opts)?,
    };
    Ok(x)
}

/// Exact-in-law simulation on `[0, t_end]` by thinning at rate `α`.
pub fn simulate_continuous<R: Rng + ?Sized>(
    ch: &Characteristics,
    z0: &EmbeddedState,
    t_end: f64,
    rng: &mut R,
    acc: &mut OccupationAccumulator,
    mut log: Option<&mut EventLog>,
) -> Result<TrajectorySummary, PdmpError> {
    check_state(ch, z0)?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(PdmpError::InvalidState(format!("t_end = {t_end}")));
    }
    let exp = exp_dist(ch.alpha);
    let mut s = *z0;
    let mut t = 0.0;
    let mut since_switch = 0.0;
    let mut real = 0;
    let mut fict = 0;
    let mut sojourns = Vec::new();
    loop {
        let tau: f64 = exp.sample(rng);
        if t + tau >= t_end {
            s.x = segment(ch, &s, t_end - t, Some(acc))?;
            break;
        }
        s.x = segment(ch, &s, tau, Some(acc))?;
        t += tau;
        since_switch += tau;
        let u: f64 = rng.random();
        let j = ch.pick_mode(s.i, &s.x.vec(), u);
        let kind = if j != s.i {
            real += 1;
            sojourns.push(Sojourn {
                mode: s.i,
                duration: since_switch,
            });
            since_switch = 0.0;
            s.i = j;
            EventKind::Switch
        } else {
            fict += 1;
            EventKind::Fictitious
        };
        if let Some(log) = log.as_deref_mut() {
            log.record(t, s.i, &s.x, kind)?;
        }
    }
    if let Some(log) = log {
        log.flush()?;
    }
    Ok(TrajectorySummary {
        final_state: s,
        t_end,
        real_events: real,
        fictitious_events: fict,
        sojourns,
    })
}

/// Which invariant object the Monte Carlo estimator targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// States of the embedded chain, an element of `Inv(P)`.
    Embedded,
    /// Embedded states pushed through `K` with fresh exponential times.
    EmbeddedK,
    /// Occupation time of the continuous process.
    Continuous,
}

#[derive(Clone, Debug)]
pub struct McOpts {
    /// Total number of chain steps (proposed events) across all chains.
    pub n_steps: u64,
    /// Steps discarded at the start of every chain.
    pub burn_in: u64,
    pub n_chains: usize,
    pub seed: u64,
    pub grid: HistGrid,
    pub estimator: Estimator,
    pub split_tol: f64,
    /// Common start; `None` draws a uniform point and mode per chain.
    pub start: Option<EmbeddedState>,
}

impl McOpts {
    pub fn new(n_steps: u64, grid: HistGrid, estimator: Estimator, seed: u64) -> Self {
        McOpts {
            n_steps,
            burn_in: 1000,
            n_chains: 4,
            seed,
            grid,
            estimator,
            split_tol: SPLIT_TOL,
            start: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct McResult {
    pub acc: OccupationAccumulator,
    /// First- and second-half estimates, merged into `acc`.
    pub halves: [OccupationAccumulator; 2],
    /// L1 distance between the first- and second-half estimates.
    pub split_half_l1: f64,
    pub converged: bool,
    pub real_events: u64,
    pub fictitious_events: u64,
}

impl McResult {
    /// Turn a failed split-half diagnostic into an error.
    pub fn require_converged(self, tol: f64) -> Result<Self, PdmpError> {
        if self.split_half_l1 > tol {
            return Err(PdmpError::NonConvergence {
                split_half_l1: self.split_half_l1,
                tol,
            });
        }
        Ok(self)
    }
}

struct ChainOut {
    halves: [OccupationAccumulator; 2],
    real: u64,
    fict: u64,
}

fn run_chain(ch: &Characteristics, opts: &McOpts, chain: usize, steps: u64) -> Result<ChainOut, PdmpError> {
    let mut rng = stream(opts.seed, chain as u64);
    let mut push_rng = stream(opts.seed, PUSH_STREAM_OFFSET + chain as u64);
    let mut s = match opts.start {
        Some(s) => {
            check_state(ch, &s)?;
            s
        }
        None => {
            let (lo, hi) = ch.space.bounds();
            let c: Vec<f64> = (0..ch.dim())
                .map(|d| lo[d] + rng.random::<f64>() * (hi[d] - lo[d]))
                .collect();
            EmbeddedState::new(Point::new(&c), rng.random_range(0..ch.n_modes()))
        }
    };
    let exp = exp_dist(ch.alpha);
    let mut halves = [
        OccupationAccumulator::new(opts.grid.clone(), ch.n_modes()),
        OccupationAccumulator::new(opts.grid.clone(), ch.n_modes()),
    ];
    let (mut real, mut fict) = (0, 0);
    for n in 0..opts.burn_in + steps {
        let recording = n >= opts.burn_in;
        let half = if n < opts.burn_in + steps / 2 { 0 } else { 1 };
        let tau: f64 = exp.sample(&mut rng);
        let acc = match (recording, opts.estimator) {
            (true, Estimator::Continuous) => Some(&mut halves[half]),
            _ => None,
        };
        s.x = segment(ch, &s, tau, acc)?;
        let u: f64 = rng.random();
        let j = ch.pick_mode(s.i, &s.x.vec(), u);
        if recording {
            if j != s.i {
                real += 1;
            } else {
                fict += 1;
            }
        }
        s.i = j;
        if !recording {
            continue;
        }
        match opts.estimator {
            Estimator::Embedded => halves[half].deposit(s.i, &s.x.vec(), 1.0),
            Estimator::EmbeddedK => {
                let t = exp.sample(&mut push_rng);
                let y = flow_point(&ch.space, &ch.modes[s.i], &s.x, t, &ch.opts)?;
                halves[half].deposit(s.i, &y.vec(), 1.0);
            }
            Estimator::Continuous => {}
        }
    }
    Ok(ChainOut { halves, real, fict })
}

/// Monte Carlo estimate of an invariant measure from independent chains.
///
/// Chain `c` uses stream `c` of the master seed, so results do not depend
/// on the thread count. Per-chain halves are merged in chain order.
pub fn invariant_measure_mc(ch: &Characteristics, opts: &McOpts) -> Result<McResult, PdmpError> {
    if opts.n_steps < 10_000 {
        return Err(PdmpError::InvalidState(format!(
            "n_steps = {} is below the minimum of 10000",
            opts.n_steps
        )));
    }
    if opts.n_chains == 0 {
        return Err(PdmpError::InvalidState("n_chains = 0".into()));
    }
    opts.grid.validate()?;
    let per = opts.n_steps / opts.n_chains as u64;
    let extra = opts.n_steps % opts.n_chains as u64;
    let outs: Vec<Result<ChainOut, PdmpError>> = (0..opts.n_chains)
        .into_par_iter()
        .map(|c| run_chain(ch, opts, c, per + u64::from((c as u64) < extra)))
        .collect();
    let mut a = OccupationAccumulator::new(opts.grid.clone(), ch.n_modes());
    let mut b = a.clone();
    let (mut real, mut fict) = (0, 0);
    for out in outs {
        let out = out?;
        a.merge(&out.halves[0])?;
        b.merge(&out.halves[1])?;
        real += out.real;
        fict += out.fict;
    }
    let split = a.l1_distance(&b);
    let mut acc = a.clone();
    acc.merge(&b)?;
    Ok(McResult {
        acc,
        halves: [a, b],
        split_half_l1: split,
        converged: split <= opts.split_tol,
        real_events: real,
        fictitious_events: fict,
    })
}
