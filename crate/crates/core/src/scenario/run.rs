use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, Vector2};
use rayon::prelude::*;

use super::config::{
    AnchorSpec, CompareSpec, DensitySource, Experiment, MapConfig, McConfig, ProbeSpec, Scenario,
    SystemConfig,
};
use super::report::{Outputs, RunReport, Status};
use super::ScenarioError;
use crate::bracket::{gamma_estimate, spread_seeds, weak_bracket_rank};
use crate::density::{
    blowup_at, estimate_density, smoothness_probe, support_estimate, EmpiricalDensity, Region,
    SmoothnessReport, Verdict, VerdictThresholds,
};
use crate::ergodic::{
    ergplan_check, expansion_profile, find_periodic_orbits, OrbitCandidate, OrbitOpts,
};
use crate::geometry::{
    flow_map_as_function, FieldSpec, IntegratorOpts, Point, Profile, Space,
};
use crate::pdmp::{
    invariant_measure_mc, l1, HistGrid, McResult, OccupationAccumulator, TransportSolution,
};
use crate::rng::derive_seed;
use crate::transfer::{
    eigen_invariant, neumann_invariant, random_chain, spectral_radius, switching_invariant_density,
    CircleMapModel, QuadOpts, SpectralOpts,
};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "SWITCHLAB_OUT";
/// Output root used when neither `--out-dir` nor the environment names one.
pub const DEFAULT_OUT: &str = "switchlab-out";

#[derive(Clone, Debug)]
pub struct RunOpts {
    /// Root under which `<scenario id>/` is created.
    pub out_root: PathBuf,
    /// Replaces the scenario's master seed.
    pub seed: Option<u64>,
}

impl RunOpts {
    pub fn new(out_root: impl Into<PathBuf>) -> Self {
        RunOpts {
            out_root: out_root.into(),
            seed: None,
        }
    }

    /// `--out-dir`, else the environment variable, else [`DEFAULT_OUT`].
    pub fn default_root(cli: Option<PathBuf>) -> PathBuf {
        cli.or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}

/// Run a scenario, or its declared sweep when it has one.
pub fn run(sc: &Scenario, config: &str, opts: &RunOpts) -> Result<RunReport, ScenarioError> {
    match &sc.sweep {
        Some(sw) => sweep(sc, config, &sw.param, &sw.values, opts),
        None => {
            let seed = opts.seed.unwrap_or(sc.seed);
            let mut out = Outputs::create(&opts.out_root.join(&sc.id))?;
            run_point(sc, config, seed, &mut out)
        }
    }
}

/// Load a scenario file and run it.
pub fn run_file(path: &Path, opts: &RunOpts) -> Result<RunReport, ScenarioError> {
    let (sc, src) = Scenario::load(path)?;
    run(&sc, &src, opts)
}

/// One sub-run per value of `param`, seeded by `derive_seed(master, index)`,
/// aggregated into `sweep.csv` and a single report.
pub fn sweep(
    sc: &Scenario,
    config: &str,
    param: &str,
    values: &[f64],
    opts: &RunOpts,
) -> Result<RunReport, ScenarioError> {
    if values.is_empty() {
        return Err(ScenarioError::Config {
            line: 0,
            column: 0,
            message: "sweep needs at least one value".into(),
        });
    }
    let start = Instant::now();
    let master = opts.seed.unwrap_or(sc.seed);
    let root = opts.out_root.join(&sc.id);
    let out = Outputs::create(&root)?;
    let mut variants = Vec::with_capacity(values.len());
    for &v in values {
        let mut s = sc.clone();
        s.sweep = None;
        s.set_param(param, v)?;
        variants.push(s);
    }
    let points: Vec<RunReport> = variants
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut o = Outputs::create(&root.join(format!("{param}_{i:02}")))?;
            let cfg = format!("{config}\n# sweep {param} = {}\n", values[i]);
            run_point(s, &cfg, derive_seed(master, i as u64), &mut o)
        })
        .collect::<Result<_, _>>()?;

    let mut rep = RunReport::new(&sc.id, sc.experiment.kind(), config, master);
    rep.budget_seconds = sc.budget_seconds;
    rep.text("sweep_param", param);
    rep.int("sweep_points", values.len() as i64);
    let key = primary_metric(&sc.experiment);
    let mut rows = Vec::new();
    for (i, (v, p)) in values.iter().zip(&points).enumerate() {
        let metric = p.metric(key).map(|m| m.to_string().trim_matches('"').to_string()).unwrap_or_default();
        let verdict = p
            .metric("verdict")
            .map(|m| m.to_string().trim_matches('"').to_string())
            .unwrap_or_else(|| p.status().as_str().to_string());
        rep.text(format!("point{i:02}_{param}"), v.to_string());
        rep.text(format!("point{i:02}_{key}"), metric.clone());
        rep.text(format!("point{i:02}_verdict"), verdict.clone());
        rows.push(vec![v.to_string(), key.to_string(), metric, verdict]);
        for c in &p.checks {
            let name = format!("point{i:02}_{}", c.name);
            if c.asserted {
                rep.check(name, c.status, c.detail.clone());
            } else {
                rep.report_only(name, c.status, c.detail.clone());
            }
        }
    }
    out.table("sweep.csv", &["value", "metric", "metric_value", "verdict"], &rows)?;
    aggregate(&sc.experiment, values, &points, &mut rep);
    rep.wall_time = start.elapsed().as_secs_f64();
    out.write_text("report.txt", &rep.render())?;
    out.write_text("metrics.csv", &rep.metrics_csv())?;
    out.finish()?;
    Ok(rep)
}

fn primary_metric(e: &Experiment) -> &'static str {
    match e {
        Experiment::SpectralRadius { .. } => "radius_k0",
        Experiment::ExpansionRates { .. } => "volume_rate_k0",
        Experiment::OrbitFloquet { .. } => "orbits",
        Experiment::InvariantDensity { .. } => "split_half_l1",
        Experiment::ThresholdSweep { .. } => "sup_finest",
        Experiment::FastSwitchingSweep { .. } => "bounded_orders",
        Experiment::BlowupAffine { .. } => "flagged_anchors",
        Experiment::GammaSupport { .. } => "mode_symmetric_difference",
        Experiment::NeumannCheck { .. } => "max_residual",
        Experiment::TelegraphOracle { .. } => "mc_first_diverging",
    }
}

/// Sweep-level checks that no single point can make.
fn aggregate(e: &Experiment, values: &[f64], points: &[RunReport], rep: &mut RunReport) {
    match e {
        Experiment::FastSwitchingSweep { k_max, .. } => {
            let smooth: Vec<bool> = points
                .iter()
                .map(|p| p.value("bounded_orders") == Some((*k_max + 1) as f64))
                .collect();
            let first = (0..smooth.len()).find(|&i| smooth[i..].iter().all(|s| *s));
            match first {
                Some(i) => {
                    rep.num("alpha_star", values[i]);
                    rep.check(
                        "fast_switching_threshold",
                        Status::Pass,
                        format!("every k <= {k_max} bounded for all swept values >= {}", values[i]),
                    );
                }
                None => rep.check(
                    "fast_switching_threshold",
                    Status::Fail,
                    "no swept value above which all orders read as bounded",
                ),
            }
        }
        Experiment::TelegraphOracle { .. } => {
            let mut order: Vec<(f64, f64)> = values
                .iter()
                .zip(points)
                .filter_map(|(v, p)| p.value("oracle_first_diverging").map(|k| (*v, k)))
                .collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            // -1 stands for "no diverging order", the smoothest outcome.
            let rank = |k: f64| if k < 0.0 { f64::INFINITY } else { k };
            let monotone = order.windows(2).all(|w| rank(w[1].1) >= rank(w[0].1));
            rep.check(
                "first_diverging_monotone_in_rate",
                Status::from_bool(monotone),
                format!("{order:?}"),
            );
        }
        _ => {}
    }
}

fn run_point(sc: &Scenario, config: &str, seed: u64, out: &mut Outputs) -> Result<RunReport, ScenarioError> {
    let start = Instant::now();
    let mut rep = RunReport::new(&sc.id, sc.experiment.kind(), config, seed);
    rep.budget_seconds = sc.budget_seconds;
    match &sc.experiment {
        Experiment::SpectralRadius {
            map,
            ks,
            n,
            n_iter,
            n_probes,
            expect,
            rel_tol,
        } => {
            let opts = SpectralOpts {
                n: *n,
                n_iter: *n_iter,
                n_probes: *n_probes,
                seed,
                ..SpectralOpts::default()
            };
            spectral(map, ks, &opts, expect.as_deref(), *rel_tol, &mut rep, out)?
        }
        Experiment::ExpansionRates {
            map,
            ks,
            grid_res,
            n_max,
            expect,
            rel_tol,
        } => expansion(map, ks, *grid_res, *n_max, expect.as_deref(), *rel_tol, &mut rep, out)?,
        Experiment::OrbitFloquet {
            space,
            field,
            candidates,
            ks,
            grid_res,
            n_max,
            step,
            map_step,
            rel_tol,
            ergplan_tol,
        } => orbit_floquet(
            space,
            field,
            candidates,
            ks,
            (*grid_res, *n_max),
            (*step, *map_step),
            (*rel_tol, *ergplan_tol),
            &mut rep,
            out,
        )?,
        Experiment::InvariantDensity {
            system,
            mc,
            ladder,
            probes,
            compare,
            thresholds,
        } => invariant_density(&sc.id, system, mc, ladder, probes, compare.as_ref(), thresholds, seed, &mut rep, out)?,
        Experiment::ThresholdSweep {
            system,
            source,
            ladder,
            k,
            region,
            bounded_from,
            thresholds,
        } => {
            let d = source_density(&sc.id, system, source, ladder, seed, &mut rep)?;
            let r = smoothness_probe(&d, *k, region, thresholds)?;
            smoothness_series(&r, "smoothness.csv", &mut rep, out)?;
            rep.num("sup_finest", *r.sups.last().unwrap());
            rep.text("verdict", r.verdict.as_str());
            let min_rate = min_offdiagonal(&system.constant_rates()?);
            rep.num("min_rate", min_rate);
            let detail = format!("k = {k}, min rate {min_rate}: {}", r.verdict.as_str());
            if min_rate >= *bounded_from {
                rep.check(
                    "bounded_above_threshold",
                    Status::from_bool(r.verdict == Verdict::BoundedStable),
                    detail,
                );
            } else {
                rep.report_only("verdict_below_threshold", verdict_status(r.verdict), detail);
            }
        }
        Experiment::FastSwitchingSweep {
            system,
            source,
            ladder,
            k_max,
            region,
            thresholds,
        } => {
            let d = source_density(&sc.id, system, source, ladder, seed, &mut rep)?;
            let mut bounded = 0;
            let mut verdicts = Vec::new();
            for k in 0..=*k_max {
                let r = smoothness_probe(&d, k, region, thresholds)?;
                smoothness_series(&r, &format!("smoothness_k{k}.csv"), &mut rep, out)?;
                if r.verdict == Verdict::BoundedStable {
                    bounded += 1;
                }
                verdicts.push(r.verdict.as_str());
                rep.report_only(format!("smoothness_k{k}"), verdict_status(r.verdict), r.verdict.as_str());
            }
            rep.num("rate_scale", system.rate_scale);
            rep.int("bounded_orders", bounded);
            rep.text("verdict", verdicts.join("/"));
        }
        Experiment::BlowupAffine {
            system,
            mc,
            ladder,
            anchors,
            expect_flagged,
            bracket_generation,
            bracket_grid,
        } => blowup(
            &sc.id,
            system,
            mc,
            ladder,
            anchors,
            *expect_flagged,
            (*bracket_generation, *bracket_grid),
            seed,
            &mut rep,
            out,
        )?,
        Experiment::GammaSupport {
            system,
            mc,
            threshold,
            seeds_per_axis,
            dt,
            max_iter,
            cover_min,
            symdiff_max,
        } => gamma_support(
            &sc.id,
            system,
            mc,
            *threshold,
            (*seeds_per_axis, *dt, *max_iter),
            (*cover_min, *symdiff_max),
            seed,
            &mut rep,
            out,
        )?,
        Experiment::NeumannCheck {
            instances,
            states,
            residual_tol,
            oracle_tol,
        } => neumann(*instances, *states, *residual_tol, *oracle_tol, seed, &mut rep, out)?,
        Experiment::TelegraphOracle {
            system,
            mc,
            l1_bins,
            l1_max,
            ladder,
            k_max,
            thresholds,
        } => telegraph(
            &sc.id,
            system,
            mc,
            (*l1_bins, *l1_max),
            ladder,
            *k_max,
            thresholds,
            seed,
            &mut rep,
            out,
        )?,
    }
    rep.wall_time = start.elapsed().as_secs_f64();
    out.write_text("report.txt", &rep.render())?;
    out.write_text("metrics.csv", &rep.metrics_csv())?;
    out.finish()?;
    Ok(rep)
}

fn verdict_status(v: Verdict) -> Status {
    match v {
        Verdict::BoundedStable => Status::Pass,
        Verdict::Inconclusive => Status::Inconclusive,
        Verdict::Diverging => Status::Fail,
    }
}

fn min_offdiagonal(a: &DMatrix<f64>) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            if i != j {
                m = m.min(a[(i, j)]);
            }
        }
    }
    m
}

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-300)
}

fn spectral(
    map: &MapConfig,
    ks: &[usize],
    opts: &SpectralOpts,
    expect: Option<&[f64]>,
    rel_tol: f64,
    rep: &mut RunReport,
    out: &mut Outputs,
) -> Result<(), ScenarioError> {
    let model = CircleMapModel::new(map.build()?)?;
    rep.int("grid_n", opts.n as i64);
    rep.int("n_iter", opts.n_iter as i64);
    rep.int("degree", model.degree() as i64);
    let mut rows = Vec::new();
    for (idx, &k) in ks.iter().enumerate() {
        let e = spectral_radius(&model, k, opts)?;
        rep.num(format!("radius_k{k}"), e.radius);
        rep.text(format!("window_k{k}"), format!("{}..{}", e.window.0, e.window.1));
        rep.text(format!("resolved_k{k}"), e.resolved.to_string());
        let pts: Vec<(f64, f64)> = e.growth.iter().enumerate().map(|(i, g)| ((i + 1) as f64, *g)).collect();
        out.series(&format!("growth_k{k}.csv"), "iteration", "seminorm_ratio", &pts)?;
        let want = expect.and_then(|x| x.get(idx)).copied();
        rows.push(vec![
            k.to_string(),
            e.radius.to_string(),
            e.window.0.to_string(),
            e.window.1.to_string(),
            e.resolved.to_string(),
            want.map(|w| w.to_string()).unwrap_or_default(),
        ]);
        if let Some(w) = want {
            let err = rel_err(e.radius, w);
            rep.check(
                format!("radius_k{k}"),
                Status::from_bool(err <= rel_tol),
                format!("{:.4} vs {w} (rel err {err:.3}, tol {rel_tol}, window {:?})", e.radius, e.window),
            );
        }
    }
    out.table("radii.csv", &["k", "radius", "window_start", "window_end", "resolved", "expected"], &rows)
}

#[allow(clippy::too_many_arguments)]
fn expansion(
    map: &MapConfig,
    ks: &[u32],
    grid_res: usize,
    n_max: usize,
    expect: Option<&[f64]>,
    rel_tol: f64,
    rep: &mut RunReport,
    out: &mut Outputs,
) -> Result<(), ScenarioError> {
    let m = map.build()?;
    let prof = expansion_profile(&m, grid_res, n_max)?;
    rep.int("grid_resolution", grid_res as i64);
    rep.int("n_max", n_max as i64);
    let e = prof.rate();
    rep.num("expansion_rate", e.value);
    rep.num("expansion_rate_fekete_min", e.fekete_min);
    let pts: Vec<(f64, f64)> = e.per_n_values.iter().enumerate().map(|(i, v)| ((i + 1) as f64, *v)).collect();
    out.series("expansion_rate.csv", "n", "rate", &pts)?;
    for (idx, &k) in ks.iter().enumerate() {
        let v = prof.volume_rate(k);
        rep.num(format!("volume_rate_k{k}"), v.value);
        let pts: Vec<(f64, f64)> = v.per_n_values.iter().enumerate().map(|(i, x)| ((i + 1) as f64, *x)).collect();
        out.series(&format!("volume_rate_k{k}.csv"), "n", "rate", &pts)?;
        if let Some(w) = expect.and_then(|x| x.get(idx)) {
            let err = rel_err(v.value, *w);
            rep.check(
                format!("volume_rate_k{k}"),
                Status::from_bool(err <= rel_tol),
                format!("{:.5} vs {w} (rel err {err:.3}, tol {rel_tol}, n = {n_max})", v.value),
            );
        }
    }
    let ev0 = prof.volume_rate(0).value;
    let d = m.dim() as f64;
    let log_deg = (m.degree() as f64).ln();
    let ok = d * e.value <= ev0 + 1e-9 && ev0 <= log_deg + 1e-9;
    rep.check(
        "rate_chain",
        Status::from_bool(ok),
        format!("d·E = {:.5} <= EV0 = {ev0:.5} <= log deg = {log_deg:.5}", d * e.value),
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn orbit_floquet(
    space: &Space,
    field: &FieldSpec,
    candidates: &[OrbitCandidate],
    ks: &[u32],
    (grid_res, n_max): (usize, usize),
    (step, map_step): (f64, f64),
    (rel_tol, ergplan_tol): (f64, f64),
    rep: &mut RunReport,
    out: &mut Outputs,
) -> Result<(), ScenarioError> {
    let integrator = IntegratorOpts::with_step(step);
    let opts = OrbitOpts {
        integrator,
        ..OrbitOpts::default()
    };
    let orbits = find_periodic_orbits(space, field, candidates, &opts)?;
    rep.int("orbits", orbits.len() as i64);
    let mut rows = Vec::new();
    for (i, o) in orbits.iter().enumerate() {
        let c = ergplan_check(space, field, o, &integrator)?;
        rep.num(format!("orbit{i}_period"), o.period);
        rep.text(format!("orbit{i}_floquet"), format!("{:?}", o.floquet));
        rep.num(format!("orbit{i}_liouville_gap"), c.difference);
        rep.check(
            format!("liouville_orbit{i}"),
            Status::from_bool(c.difference < ergplan_tol),
            format!("|(1/T) log J - sum of exponents| = {:.2e} (tol {ergplan_tol:e})", c.difference),
        );
        let mut row = vec![format!("{:?}", o.kind)];
        row.extend((0..2).map(|d| o.anchor.coords().get(d).map(|v| v.to_string()).unwrap_or_default()));
        row.extend([o.period, o.floquet[0], *o.floquet.last().unwrap(), c.mean_log_jacobian, c.floquet_sum, c.difference].map(|v| v.to_string()));
        rows.push(row);
    }
    out.table(
        "orbits.csv",
        &["kind", "x0", "x1", "period", "floquet_min", "floquet_max", "mean_log_jacobian", "floquet_sum", "gap"],
        &rows,
    )?;
    if orbits.is_empty() {
        rep.report_only("orbits_found", Status::Inconclusive, "no orbit detected from the candidates");
        return Ok(());
    }
    let map = flow_map_as_function(space, field, 1.0, &IntegratorOpts::with_step(map_step))?;
    let prof = expansion_profile(&map, grid_res, n_max)?;
    for &k in ks {
        let want = orbits
            .iter()
            .map(|o| o.floquet.iter().sum::<f64>() + k as f64 * o.floquet[0])
            .fold(f64::INFINITY, f64::min);
        let got = prof.volume_rate(k).value;
        let err = rel_err(got, want);
        rep.num(format!("volume_rate_k{k}"), got);
        rep.num(format!("orbit_prediction_k{k}"), want);
        rep.check(
            format!("volume_rate_k{k}"),
            Status::from_bool(err <= rel_tol),
            format!("{got:.5} vs orbit value {want:.5} (rel err {err:.3}, grid {grid_res}, n = {n_max})"),
        );
    }
    Ok(())
}

fn mc_run(system: &SystemConfig, mc: &McConfig, seed: u64, rep: &mut RunReport) -> Result<McResult, ScenarioError> {
    let ch = system.characteristics()?;
    let res = invariant_measure_mc(&ch, &mc.opts(&ch.space, seed))?;
    record_mc(&res, mc, rep);
    Ok(res)
}

fn record_mc(res: &McResult, mc: &McConfig, rep: &mut RunReport) {
    rep.int("events", mc.events as i64);
    rep.int("real_events", res.real_events as i64);
    rep.int("fictitious_events", res.fictitious_events as i64);
    rep.int("histogram_bins", mc.bins as i64);
    rep.num("split_half_l1", res.split_half_l1);
    rep.check(
        "split_half",
        if res.converged { Status::Pass } else { Status::Inconclusive },
        format!("split-half L1 = {:.4}", res.split_half_l1),
    );
}

/// Apply the configured marginal projection to an accumulator.
fn project(acc: &OccupationAccumulator, mc: &McConfig) -> Result<OccupationAccumulator, ScenarioError> {
    Ok(match mc.marginal {
        Some(axis) => acc.marginal(axis)?,
        None => acc.clone(),
    })
}

fn mc_density(id: &str, res: &McResult, mc: &McConfig, ladder: &[usize]) -> Result<EmpiricalDensity, ScenarioError> {
    Ok(estimate_density(&project(&res.acc, mc)?, ladder, id)?
        .with_halves(&project(&res.halves[0], mc)?, &project(&res.halves[1], mc)?)?)
}

fn smoothness_series(r: &SmoothnessReport, name: &str, rep: &mut RunReport, out: &mut Outputs) -> Result<(), ScenarioError> {
    let pts: Vec<(f64, f64)> = r.resolutions.iter().zip(&r.sups).map(|(n, s)| (*n as f64, *s)).collect();
    out.series(name, "resolution", "difference_sup", &pts)?;
    let stem = name.trim_end_matches(".csv");
    rep.text(format!("{stem}_sups"), join(&r.sups));
    rep.text(format!("{stem}_ratios"), join(&r.ratios));
    if let Some(n) = &r.noise {
        rep.text(format!("{stem}_noise"), join(n));
    }
    Ok(())
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6e}")).collect::<Vec<_>>().join(" ")
}

#[allow(clippy::too_many_arguments)]
fn invariant_density(
    id: &str,
    system: &SystemConfig,
    mc: &McConfig,
    ladder: &[usize],
    probes: &[ProbeSpec],
    compare: Option<&CompareSpec>,
    thresholds: &VerdictThresholds,
    seed: u64,
    rep: &mut RunReport,
    out: &mut Outputs,
) -> Result<(), ScenarioError> {
    let ch = system.characteristics()?;
    let res = mc_run(system, mc, seed, rep)?;
    let d = mc_density(id, &res, mc, ladder)?;
    d.write_csv(out.file("density.csv")?)?;
    for (i, w) in res.acc.mode_marginal().iter().enumerate() {
        rep.num(format!("mode{i}_weight"), *w);
    }
    for (i, p) in probes.iter().enumerate() {
        let r = smoothness_probe(&d, p.k, &p.region, thresholds)?;
        smoothness_series(&r, &format!("probe{i}.csv"), rep, out)?;
        rep.report_only(format!("probe{i}_k{}", p.k), verdict_status(r.verdict), r.verdict.as_str());
    }
    if let Some(c) = compare {
        let mut opts = mc.opts(&ch.space, seed);
        opts.estimator = c.estimator;
        let other = invariant_measure_mc(&ch, &opts)?;
        let dist = res.acc.l1_distance(&other.acc);
        rep.num("compare_l1", dist);
        rep.text("compare_estimators", format!("{:?} vs {:?}", mc.estimator, c.estimator));
        rep.check(
            "estimator_agreement",
            Status::from_bool(dist <= c.l1_max),
            format!("L1 = {dist:.4} at {} bins (tol {})", mc.bins, c.l1_max),
        );
    }
    Ok(())
}

/// One-dimensional field driving coordinate `axis`, when it ignores the other
/// coordinate.
fn axis_field(f: &FieldSpec, axis: usize) -> Option<FieldSpec> {
    match f {
        FieldSpec::Constant { v, dim: 2 } => Some(FieldSpec::constant(&[v[axis]])),
        FieldSpec::ShearSin { c, .. } if axis == 0 => Some(FieldSpec::constant(&[*c])),
        FieldSpec::ShearSin { s, .. } => Some(FieldSpec::Circle1D(Profile::Sine {
            offset: 0.0,
            amp: -s,
            freq: 1.0,
            phase: 0.0,
        })),
        f if f.dim() == 1 && axis == 0 => Some(f.clone()),
        _ => None,
    }
}

/// Histogram holding trapezoid masses of nodal values on `[0, 1)`.
fn nodal_accumulator(modes: &[Vec<f64>]) -> OccupationAccumulator {
    let n = modes[0].len();
    let mut acc = OccupationAccumulator::new(HistGrid::for_space(&Space::Torus1, n), modes.len());
    for (i, v) in modes.iter().enumerate() {
        for j in 0..n {
            let w = 0.5 * (v[j] + v[(j + 1) % n]) / n as f64;
            acc.deposit(i, &Vector2::new((j as f64 + 0.5) / n as f64, 0.0), w);
        }
    }
    acc
}

fn source_density(
    id: &str,
    system: &SystemConfig,
    source: &DensitySource,
    ladder: &[usize],
    seed: u64,
    rep: &mut RunReport,
) -> Result<EmpiricalDensity, ScenarioError> {
    match source {
        DensitySource::Mc(mc) => {
            let res = mc_run(system, mc, seed, rep)?;
            mc_density(id, &res, mc, ladder)
        }
        DensitySource::TransferMarginal {
            axis,
            nodes,
            tol,
            max_iter,
        } => {
            if !system.space.is_torus() || *axis >= system.space.dim() {
                return Err(ScenarioError::Invalid(
                    "transfer_marginal needs a torus and an axis of it".into(),
                ));
            }
            let fields = system
                .fields
                .iter()
                .map(|f| axis_field(f, *axis))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| {
                    ScenarioError::Invalid(format!("some field depends on more than coordinate {axis}"))
                })?;
            let quad = QuadOpts {
                integrator: IntegratorOpts::with_step(system.step),
                ..QuadOpts::default()
            };
            let r = switching_invariant_density(
                &Space::Torus1,
                &fields,
                &system.constant_rates()?,
                *nodes,
                &quad,
                *tol,
                *max_iter,
            )?;
            rep.text("density_source", format!("transfer marginal on axis {axis}"));
            rep.int("transfer_nodes", *nodes as i64);
            rep.int("transfer_iterations", r.iterations as i64);
            rep.num("transfer_residual", r.residual);
            rep.check(
                "transfer_converged",
                if r.converged { Status::Pass } else { Status::Inconclusive },
                format!("L1 change {:.2e} after {} iterations", r.residual, r.iterations),
            );
            let modes: Vec<Vec<f64>> = r.modes.iter().map(|g| g.values().to_vec()).collect();
            Ok(estimate_density(&nodal_accumulator(&modes), ladder, id)?)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn blowup(
    id: &str,
    system: &SystemConfig,
    mc: &McConfig,
    ladder: &[usize],
    anchors: &[AnchorSpec],
    expect_flagged: bool,
    (generation, grid): (usize, usize),
    seed: u64,
    rep: &mut RunReport,
    out: &mut Outputs,
) -> Result<(), ScenarioError> {
    let res = mc_run(system, mc, seed, rep)?;
    let d = estimate_density(&res.acc, ladder, id)?;
    let mut flagged = 0;
    for (i, a) in anchors.iter().enumerate() {
        let b = blowup_at(&d, &Point::new(&a.point), a.mode)?;
        let pts: Vec<(f64, f64)> = b.resolutions.iter().zip(&b.values).map(|(n, v)| (*n as f64, *v)).collect();
        out.series(&format!("blowup_anchor{i}.csv"), "resolution", "centered_density", &pts)?;
        rep.text(format!("anchor{i}_ratios"), join(&b.ratios));
        rep.num(format!("anchor{i}_exponent"), b.exponent);
        flagged += b.flagged as i64;
        rep.check(
            format!("blowup_anchor{i}"),
            Status::from_bool(b.flagged == expect_flagged),
            format!(
                "mode {} at {:?}: flagged = {} (expected {expect_flagged}), ratios {}",
                a.mode,
                a.point,
                b.flagged,
                join(&b.ratios)
            ),
        );
    }
    rep.int("flagged_anchors", flagged);

    let (lo, hi) = system.space.bounds();
    let dim = system.space.dim();
    let mut full = 0;
    let mut total = 0;
    let mut min_rank = usize::MAX;
    let ys = if dim == 1 { 1 } else { grid };
    for i in 0..grid {
        for j in 0..ys {
            let x = Vector2::new(
                lo[0] + (i as f64 + 0.5) / grid as f64 * (hi[0] - lo[0]),
                if dim == 1 { 0.0 } else { lo[1] + (j as f64 + 0.5) / grid as f64 * (hi[1] - lo[1]) },
            );
            let r = weak_bracket_rank(&system.fields, generation, &x)?;
            total += 1;
            full += (r.rank == dim) as i64;
            min_rank = min_rank.min(r.rank);
        }
    }
    rep.int("bracket_points", total);
    rep.int("bracket_full_rank_points", full);
    rep.check(
        "bracket_rank",
        Status::from_bool(full == total),
        format!("rank {dim} at {full}/{total} grid points with generation {generation} (min rank {min_rank})"),
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn gamma_support(
    id: &str,
    system: &SystemConfig,
    mc: &McConfig,
    threshold: f64,
    (seeds_per_axis, dt, max_iter): (usize, f64, usize),
    (cover_min, symdiff_max): (f64, f64),
    seed: u64,
    rep: &mut RunReport,
    out: &mut Outputs,
) -> Result<(), ScenarioError> {
    let ch = system.characteristics()?;
    let res = mc_run(system, mc, seed, rep)?;
    let d = estimate_density(&res.acc, &[mc.bins], id)?;
    let supp = support_estimate(&d, threshold)?;
    let gamma = gamma_estimate(&ch, &spread_seeds(&ch, seeds_per_axis), mc.bins, dt, max_iter)?;
    let union = supp.union();
    let (in_gamma, covers_gamma) = union.mutual_cover(&gamma.mask)?;
    gamma.mask.write_csv(out.file("gamma_mask.csv")?)?;
    for (i, m) in supp.masks.iter().enumerate() {
        m.write_csv(out.file(&format!("support_mode{i}.csv"))?)?;
        rep.int(format!("support_mode{i}_cells"), m.count() as i64);
    }
    rep.num("support_threshold", threshold);
    rep.int("gamma_cells", gamma.mask.count() as i64);
    rep.int("gamma_seeds", gamma.per_seed.len() as i64);
    rep.int("gamma_components", gamma.components as i64);
    rep.num("support_in_gamma", in_gamma);
    rep.num("gamma_in_support", covers_gamma);
    rep.num("mode_symmetric_difference", supp.max_symmetric_difference);
    rep.check(
        "support_in_gamma",
        Status::from_bool(in_gamma >= cover_min),
        format!("{in_gamma:.4} of the support lies in Γ dilated by one cell (min {cover_min})"),
    );
    rep.check(
        "gamma_in_support",
        Status::from_bool(covers_gamma >= cover_min),
        format!("{covers_gamma:.4} of Γ lies in the dilated support (min {cover_min})"),
    );
    rep.check(
        "mode_supports_agree",
        Status::from_bool(supp.max_symmetric_difference <= symdiff_max),
        format!("largest symmetric difference {:.4} (max {symdiff_max})", supp.max_symmetric_difference),
    );
    rep.report_only(
        "gamma_connected",
        Status::from_bool(gamma.connected && !gamma.empty),
        format!("{} component(s){}", gamma.components, if gamma.any_capped { ", iteration cap hit" } else { "" }),
    );
    Ok(())
}

fn neumann(
    instances: usize,
    states: usize,
    residual_tol: f64,
    oracle_tol: f64,
    seed: u64,
    rep: &mut RunReport,
    out: &mut Outputs,
) -> Result<(), ScenarioError> {
    let mut rows = Vec::new();
    let (mut worst_res, mut worst_oracle) = (0.0f64, 0.0f64);
    for i in 0..instances {
        let (p, pi, delta) = random_chain(derive_seed(seed, i as u64), states);
        let r = neumann_invariant(&p, &pi, &delta)?;
        let oracle = eigen_invariant(&p)?;
        let gap = (&r.vector - &oracle).abs().sum();
        worst_res = worst_res.max(r.residual);
        worst_oracle = worst_oracle.max(gap);
        rows.push(vec![i.to_string(), r.residual.to_string(), gap.to_string(), r.terms.to_string()]);
    }
    out.table("neumann.csv", &["instance", "residual", "oracle_l1", "terms"], &rows)?;
    rep.int("instances", instances as i64);
    rep.int("states", states as i64);
    rep.num("max_residual", worst_res);
    rep.num("max_oracle_l1", worst_oracle);
    rep.check(
        "invariance_residual",
        Status::from_bool(worst_res <= residual_tol),
        format!("max ||vP - v||_1 = {worst_res:.2e} (tol {residual_tol:e})"),
    );
    rep.check(
        "eigen_oracle",
        Status::from_bool(worst_oracle <= oracle_tol),
        format!("max L1 gap to the eigenvector = {worst_oracle:.2e} (tol {oracle_tol:e})"),
    );
    Ok(())
}

/// Sum consecutive groups of fine bins.
fn coarsen_masses(m: &[f64], bins: usize) -> Vec<f64> {
    let f = m.len() / bins;
    m.chunks(f).map(|c| c.iter().sum()).collect()
}

fn first_diverging(verdicts: &[Verdict]) -> i64 {
    verdicts
        .iter()
        .position(|v| *v == Verdict::Diverging)
        .map_or(-1, |k| k as i64)
}

#[allow(clippy::too_many_arguments)]
fn telegraph(
    id: &str,
    system: &SystemConfig,
    mc: &McConfig,
    (l1_bins, l1_max): (usize, f64),
    ladder: &[usize],
    k_max: usize,
    thresholds: &VerdictThresholds,
    seed: u64,
    rep: &mut RunReport,
    out: &mut Outputs,
) -> Result<(), ScenarioError> {
    let ch = system.characteristics()?;
    let sol = TransportSolution::solve(&ch)?;
    let (lo, hi) = sol.support;
    if !mc.bins.is_multiple_of(l1_bins) || ladder.last().is_some_and(|f| !mc.bins.is_multiple_of(*f)) {
        return Err(ScenarioError::Invalid(format!(
            "histogram bins {} must be a multiple of l1_bins and of every ladder level",
            mc.bins
        )));
    }
    let grid = HistGrid::new(1, [lo, 0.0], [hi, 1.0], mc.bins, false)?;
    let mut opts = mc.opts(&ch.space, seed);
    opts.grid = grid.clone();
    let res = invariant_measure_mc(&ch, &opts)?;
    record_mc(&res, mc, rep);
    let predicted = sol.first_singular_order().map_or(-1, |k| k as i64);
    rep.num("rate_out_mode0", system.constant_rates()?[(0, 1)]);
    rep.num("endpoint_exponent_mode0", sol.endpoint_exponents[0]);
    rep.num("endpoint_exponent_mode1", sol.endpoint_exponents[1]);
    rep.int("predicted_first_diverging", predicted);

    let coarse = HistGrid::new(1, [lo, 0.0], [hi, 1.0], l1_bins, false)?;
    let want = sol.bin_masses(&coarse)?;
    let mut rows = Vec::new();
    for i in 0..2 {
        let got = coarsen_masses(&res.acc.masses(i), l1_bins);
        let dist = l1(&got, &want[i]);
        rep.num(format!("l1_mode{i}"), dist);
        rep.check(
            format!("l1_mode{i}"),
            Status::from_bool(dist <= l1_max),
            format!("L1 to the transport solution = {dist:.4} at {l1_bins} bins (tol {l1_max})"),
        );
        for (k, (g, w)) in got.iter().zip(&want[i]).enumerate() {
            rows.push(vec![i.to_string(), coarse.center(k)[0].to_string(), g.to_string(), w.to_string()]);
        }
    }
    out.table("oracle_masses.csv", &["mode", "x", "empirical_mass", "transport_mass"], &rows)?;

    let finest = *ladder.last().ok_or_else(|| ScenarioError::Invalid("empty ladder".into()))?;
    let fine = HistGrid::new(1, [lo, 0.0], [hi, 1.0], finest, false)?;
    let exact = sol.bin_masses(&fine)?;
    let mut oracle_acc = OccupationAccumulator::new(fine.clone(), 2);
    for (i, m) in exact.iter().enumerate() {
        for (k, w) in m.iter().enumerate() {
            oracle_acc.deposit(i, &Vector2::new(fine.center(k)[0], 0.0), *w);
        }
    }
    let d_mc = estimate_density(&res.acc, ladder, id)?.with_halves(&res.halves[0], &res.halves[1])?;
    d_mc.write_csv(out.file("density.csv")?)?;
    let d_or = estimate_density(&oracle_acc, ladder, id)?;
    let region = Region {
        boxes: vec![],
        anchors: sol.zeros.iter().map(|z| vec![*z]).collect(),
    };
    let (mut v_mc, mut v_or) = (Vec::new(), Vec::new());
    let mut rows = Vec::new();
    for k in 0..=k_max {
        let a = smoothness_probe(&d_mc, k, &region, thresholds)?;
        let b = smoothness_probe(&d_or, k, &region, thresholds)?;
        rows.push(vec![
            k.to_string(),
            a.verdict.as_str().to_string(),
            join(&a.sups),
            a.noise.as_deref().map(join).unwrap_or_default(),
            join(&a.ratios),
            b.verdict.as_str().to_string(),
            join(&b.ratios),
        ]);
        v_mc.push(a.verdict);
        v_or.push(b.verdict);
    }
    out.table("ladder.csv", &["k", "mc_verdict", "mc_sups", "mc_noise", "mc_ratios", "oracle_verdict", "oracle_ratios"], &rows)?;
    let (mc_first, or_first) = (first_diverging(&v_mc), first_diverging(&v_or));
    rep.int("mc_first_diverging", mc_first);
    rep.int("oracle_first_diverging", or_first);
    let predicted_in_range = if predicted > k_max as i64 { -1 } else { predicted };
    rep.check(
        "oracle_ladder_matches_exponent",
        Status::from_bool(or_first == predicted_in_range),
        format!("smallest diverging k on transport bins = {or_first}, predicted {predicted_in_range}"),
    );
    let below = if predicted < 0 { k_max + 1 } else { (predicted as usize).min(k_max + 1) };
    rep.check(
        "mc_no_divergence_above_threshold",
        Status::from_bool(v_mc[..below].iter().all(|v| *v != Verdict::Diverging)),
        format!("sampled verdicts for k < {below}: {:?}", &v_mc[..below]),
    );
    rep.report_only(
        "mc_bounded_above_threshold",
        Status::from_bool(v_mc[..below].iter().all(|v| *v == Verdict::BoundedStable)),
        format!("sampled verdicts for k < {below}: {:?}", &v_mc[..below]),
    );
    if predicted >= 0 && (predicted as usize) <= k_max {
        let v = v_mc[predicted as usize];
        rep.check(
            "mc_no_contradiction",
            Status::from_bool(v != Verdict::BoundedStable),
            format!("sampled verdict at the predicted order {predicted}: {}", v.as_str()),
        );
        rep.report_only(
            "mc_first_diverging",
            match v {
                Verdict::Diverging => Status::Pass,
                Verdict::Inconclusive => Status::Inconclusive,
                Verdict::BoundedStable => Status::Fail,
            },
            format!("sampled smallest diverging k = {mc_first}, predicted {predicted}"),
        );
    }
    Ok(())
}
