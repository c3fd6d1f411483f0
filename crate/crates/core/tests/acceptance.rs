//! Acceptance suite: one PASS/FAIL line per criterion, driven through the
//! shipped scenarios and the scenario runner.

use std::f64::consts::{LN_2, PI};
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::Matrix2;
use switchlab::ergodic::expansion_profile;
use switchlab::geometry::{flow_map_as_function, FieldSpec, IntegratorOpts, MapHandle, Space};
use switchlab::scenario::{run, shipped, Experiment, RunOpts, RunReport, Scenario, Status};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            pass: true,
            detail: String::new(),
        }
    }

    fn expect(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if !ok {
            self.pass = false;
            self.detail.push_str(&format!("[FAILED] {what}; "));
        } else {
            self.detail.push_str(&format!("{what}; "));
        }
    }

    fn note(&mut self, what: impl Into<String>) {
        self.detail.push_str(&format!("(reported) {}; ", what.into()));
    }
}

type Criterion = fn(&std::path::Path) -> Outcome;

fn run_shipped(id: &str, out: &std::path::Path) -> RunReport {
    let src = shipped(id).unwrap_or_else(|| panic!("no shipped scenario {id}"));
    let sc = Scenario::from_toml(src).unwrap();
    run(&sc, src, &RunOpts::new(out)).unwrap_or_else(|e| panic!("{id}: {e}"))
}

fn num(r: &RunReport, key: &str) -> f64 {
    r.value(key).unwrap_or_else(|| panic!("{}: metric {key} missing", r.scenario))
}

fn text(r: &RunReport, key: &str) -> String {
    r.metric(key)
        .unwrap_or_else(|| panic!("{}: metric {key} missing", r.scenario))
        .to_string()
        .trim_matches('"')
        .to_string()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn point(r: &RunReport, i: usize, key: &str) -> String {
    text(r, &format!("point{i:02}_{key}"))
}

fn sub_reports(root: &std::path::Path, id: &str, param: &str, n: usize) -> Vec<String> {
    (0..n)
        .map(|i| {
            std::fs::read_to_string(root.join(id).join(format!("{param}_{i:02}")).join("metrics.csv"))
                .unwrap()
        })
        .collect()
}

fn csv_value(metrics: &str, key: &str) -> f64 {
    metrics
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")))
        .unwrap_or_else(|| panic!("metric {key} missing"))
        .parse()
        .unwrap()
}

fn c1(out: &std::path::Path) -> Outcome {
    let mut o = Outcome::new();
    let r = run_shipped("countercampbell_spectral", out);
    for (k, want) in [(0, 2.0), (1, 4.0), (2, 8.0)] {
        let got = num(&r, &format!("radius_k{k}"));
        o.expect(rel(got, want) <= 0.15, format!("k={k}: {got:.4} vs {want}"));
    }
    o.expect(num(&r, "grid_n") == 2048.0 && num(&r, "n_iter") == 40.0, "N = 2048, n_iter = 40");
    o.expect(r.wall_time < 60.0, format!("{:.1} s < 60 s", r.wall_time));
    o
}

fn c2(out: &std::path::Path) -> Outcome {
    let mut o = Outcome::new();
    let r = run_shipped("doubling_spectral", out);
    for k in 0..2 {
        let got = num(&r, &format!("radius_k{k}"));
        o.expect((got - 1.0).abs() <= 0.05, format!("k={k}: {got:.4}"));
    }
    o.expect(r.wall_time < 30.0, format!("{:.1} s < 30 s", r.wall_time));
    o
}

fn c3(out: &std::path::Path) -> Outcome {
    let mut o = Outcome::new();
    let r = run_shipped("countercampbell_rates", out);
    o.expect(num(&r, "n_max") == 30.0, "n_max = 30");
    for k in 0..3 {
        let want = -LN_2 * (k + 1) as f64;
        let got = num(&r, &format!("volume_rate_k{k}"));
        o.expect(rel(got, want) <= 0.1, format!("EV_{k} = {got:.4} vs {want:.4}"));
    }
    let opts = IntegratorOpts::default();
    let catalog: Vec<(&str, MapHandle, usize)> = vec![
        ("identity", MapHandle::Identity { space: Space::Torus1 }, 256),
        ("rotation", MapHandle::Rotation { theta: 0.3 }, 256),
        ("doubling", MapHandle::Expanding { m: 2 }, 256),
        ("tripling", MapHandle::Expanding { m: 3 }, 256),
        (
            "cat",
            MapHandle::Linear {
                space: Space::Torus2,
                m: Matrix2::new(2.0, 1.0, 1.0, 1.0),
            },
            16,
        ),
        (
            "shear_doubling",
            MapHandle::Linear {
                space: Space::Torus2,
                m: Matrix2::new(2.0, 1.0, 0.0, 2.0),
            },
            16,
        ),
        (
            "countercampbell",
            flow_map_as_function(&Space::Torus1, &FieldSpec::CounterCampbell { alpha: 2.0 }, 1.0, &opts).unwrap(),
            256,
        ),
        (
            "shear_flow",
            flow_map_as_function(&Space::Torus2, &FieldSpec::ShearSin { c: 1.0, s: 0.1 }, 1.0, &IntegratorOpts::with_step(1e-2))
                .unwrap(),
            8,
        ),
    ];
    for (name, map, res) in catalog {
        let p = expansion_profile(&map, res, 30).unwrap();
        let d = map.dim() as f64;
        let e = p.rate().value;
        let ev0 = p.volume_rate(0).value;
        let log_deg = (map.degree() as f64).ln();
        o.expect(
            d * e <= ev0 + 1e-9 && ev0 <= log_deg + 1e-9,
            format!("{name}: {:.3} <= {ev0:.3} <= {log_deg:.3}", d * e),
        );
    }
    o
}

fn c4(out: &std::path::Path) -> Outcome {
    let mut o = Outcome::new();
    let r = run_shipped("shear_orbits", out);
    let n = num(&r, "orbits") as usize;
    o.expect(n >= 1, format!("{n} orbits"));
    for i in 0..n {
        let gap = num(&r, &format!("orbit{i}_liouville_gap"));
        o.expect(gap < 1e-6, format!("orbit {i}: Liouville gap {gap:.1e}"));
    }
    for k in 0..3 {
        let want = (k + 1) as f64 * (-2.0 * PI * 0.1);
        let got = num(&r, &format!("volume_rate_k{k}"));
        o.expect(rel(got, want) <= 0.1, format!("EV_{k} = {got:.4} vs {want:.4}"));
    }
    o
}

fn c5(out: &std::path::Path) -> Outcome {
    let mut o = Outcome::new();
    let r = run_shipped("kernel_telegraph", out);
    o.expect(num(&r, "events") >= 1e6, "1e6 events");
    o.expect(num(&r, "histogram_bins") == 64.0, "64 bins");
    let d = num(&r, "compare_l1");
    o.expect(d <= 0.05, format!("L1(occupation, embedded·K) = {d:.4}"));
    o.expect(r.wall_time < 300.0, format!("{:.1} s < 300 s", r.wall_time));
    o
}

/// Smallest order at which the telegraph density stops being `C^k`. Both
/// fields contract at unit rate, so the endpoint exponent is `rate - 1`.
fn telegraph_prediction(rate: f64) -> i64 {
    let beta = rate - 1.0;
    if beta < 0.0 {
        0
    } else {
        beta.floor() as i64 + 1
    }
}

fn c6(out: &std::path::Path) -> Outcome {
    let mut o = Outcome::new();
    let r = run_shipped("telegraph_ladder", out);
    let rates = [0.5, 1.5, 2.5, 3.5];
    let subs = sub_reports(out, "telegraph_ladder", "rate", rates.len());
    for (i, (&rate, m)) in rates.iter().zip(&subs).enumerate() {
        let l1 = csv_value(m, "l1_mode0").max(csv_value(m, "l1_mode1"));
        o.expect(l1 <= 0.05, format!("rate {rate}: L1 {l1:.4}"));
        let want = telegraph_prediction(rate);
        let oracle = csv_value(m, "oracle_first_diverging") as i64;
        o.expect(oracle == want, format!("rate {rate}: first diverging k {oracle} vs {want}"));
        o.expect(
            point(&r, i, "verdict") == "pass",
            format!("rate {rate}: sampled verdicts consistent"),
        );
        let mc = csv_value(m, "mc_first_diverging") as i64;
        o.note(format!("rate {rate}: sampled first diverging k {mc}"));
    }
    o.expect(
        r.check_status("first_diverging_monotone_in_rate") == Some(Status::Pass),
        "monotone in rate",
    );
    o
}

fn c7(out: &std::path::Path) -> Outcome {
    let mut o = Outcome::new();
    let r = run_shipped("torus_threshold", out);
    let sc = Scenario::from_toml(shipped("torus_threshold").unwrap()).unwrap();
    let Experiment::ThresholdSweep { system, k, .. } = &sc.experiment else {
        panic!("torus_threshold is not a threshold sweep");
    };
    let s = system
        .fields
        .iter()
        .find_map(|f| match f {
            FieldSpec::ShearSin { s, .. } => Some(*s),
            _ => None,
        })
        .unwrap();
    o.expect(s == 0.1 && *k == 0, format!("s = {s}, k = {k}"));
    o.note(format!("threshold 2*pi*s = {:.3}", 2.0 * PI * s));
    let rates = [0.2, 0.45, 0.8, 1.3, 2.0];
    for (i, rate) in rates.iter().enumerate() {
        let v = point(&r, i, "verdict");
        if *rate >= 0.8 {
            o.expect(v == "BoundedStable", format!("rate {rate}: {v}"));
        } else {
            o.note(format!("rate {rate}: {v}"));
        }
    }
    o.expect(r.wall_time < 900.0, format!("{:.1} s < 900 s", r.wall_time));
    o
}

fn c8(out: &std::path::Path) -> Outcome {
    let mut o = Outcome::new();
    for (id, scale, flagged) in [("affine_blowup", 1.0, true), ("affine_fast", 10.0, false)] {
        let sc = Scenario::from_toml(shipped(id).unwrap()).unwrap();
        let Experiment::BlowupAffine { system, .. } = &sc.experiment else {
            panic!("{id} is not a blow-up experiment");
        };
        let a = system.constant_rates().unwrap();
        let exit = a[(0, 1)];
        o.expect(exit == scale, format!("{id}: exit rate {exit}"));
        let r = run_shipped(id, out);
        for i in 0..2 {
            let ok = r.check_status(&format!("blowup_anchor{i}")) == Some(Status::Pass);
            o.expect(ok, format!("{id}: anchor {i} flagged = {flagged}"));
        }
        let full = num(&r, "bracket_full_rank_points");
        let total = num(&r, "bracket_points");
        o.expect(total == 1e4 && full == total, format!("{id}: rank 2 at {full}/{total}"));
    }
    o
}

fn c9(out: &std::path::Path) -> Outcome {
    let mut o = Outcome::new();
    let r = run_shipped("neumann_check", out);
    o.expect(num(&r, "instances") == 20.0 && num(&r, "states") == 5.0, "20 instances of 5 states");
    let res = num(&r, "max_residual");
    let gap = num(&r, "max_oracle_l1");
    o.expect(res <= 1e-12, format!("residual {res:.1e}"));
    o.expect(gap <= 1e-10, format!("oracle gap {gap:.1e}"));
    o
}

fn c10(out: &std::path::Path) -> Outcome {
    let mut o = Outcome::new();
    let r = run_shipped("transverse_torus_fast", out);
    let n = num(&r, "sweep_points") as usize;
    let values: Vec<f64> = (0..n).map(|i| point(&r, i, "rate_scale").parse().unwrap()).collect();
    let smooth: Vec<bool> = (0..n)
        .map(|i| point(&r, i, "verdict").split('/').all(|v| v == "BoundedStable"))
        .collect();
    let star = (0..n).find(|&i| smooth[i..].iter().all(|s| *s));
    o.expect(star.is_some(), format!("alpha* = {:?}", star.map(|i| values[i])));
    o.expect(
        r.check_status("fast_switching_threshold") == Some(Status::Pass),
        "runner agrees",
    );
    o
}

fn c11(out: &std::path::Path) -> Outcome {
    let mut o = Outcome::new();
    for id in ["affine_support", "transverse_torus_support"] {
        let r = run_shipped(id, out);
        let a = num(&r, "support_in_gamma");
        let b = num(&r, "gamma_in_support");
        let d = num(&r, "mode_symmetric_difference");
        o.expect(a >= 0.95 && b >= 0.95, format!("{id}: cover {a:.3}/{b:.3}"));
        o.expect(d <= 0.02, format!("{id}: symmetric difference {d:.4}"));
    }
    o
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().unwrap();
    let criteria: [(&str, Criterion); 11] = [
        ("countercampbell spectral equality", c1),
        ("expanding-map radius", c2),
        ("expansion-volume rates", c3),
        ("periodic-orbit identities", c4),
        ("kernel correspondence", c5),
        ("telegraph oracle", c6),
        ("torus threshold sweep", c7),
        ("affine blow-up", c8),
        ("Neumann invariant", c9),
        ("fast-switching sweep", c10),
        ("support and accessibility", c11),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f(tmp.path());
        let tag = if o.pass { "PASS" } else { "FAIL" };
        failed += !o.pass as usize;
        println!(
            "{tag} criterion {:>2} {name} ({:.1} s): {}",
            i + 1,
            start.elapsed().as_secs_f64(),
            o.detail.trim_end_matches("; ")
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
