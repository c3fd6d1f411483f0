use std::fs;
use std::path::Path;
use std::process::Command;

use switchlab::scenario::{
    content_hash, run, shipped, sweep, Experiment, RatesConfig, RunOpts, RunReport, Scenario,
    ScenarioError, Status, SHIPPED,
};

fn small_telegraph(events: u64) -> String {
    format!(
        r#"id = "small"
seed = 42

[experiment]
kind = "invariant_density"
ladder = [8, 16, 32]
probes = [{{ k = 0 }}]

[experiment.system]
space = {{ kind = "trapping_box", lower = [-0.05], upper = [1.05] }}
fields = [
    {{ family = "affine", a = [[-1.0]], p = [0.0] }},
    {{ family = "affine", a = [[-1.0]], p = [1.0] }},
]
rates = [[0.0, 2.0], [2.0, 0.0]]

[experiment.mc]
events = {events}
bins = 32
"#
    )
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{}: {e}", dir.join(name).display()))
}

#[test]
fn every_shipped_scenario_parses_and_matches_its_id() {
    assert!(SHIPPED.len() >= 13);
    for (id, src) in SHIPPED {
        let sc = Scenario::from_toml(src).unwrap_or_else(|e| panic!("{id}: {e}"));
        assert_eq!(&sc.id, id);
        assert!(!sc.description.is_empty(), "{id}");
        assert!(sc.budget_seconds.is_some(), "{id}");
        if let Some(sw) = &sc.sweep {
            let mut s = sc.clone();
            for v in &sw.values {
                s.set_param(&sw.param, *v).unwrap();
            }
        }
    }
    assert!(shipped("neumann_check").is_some());
    assert!(shipped("nope").is_none());
}

#[test]
fn unknown_key_reports_its_line_and_column() {
    let src = "id = \"bad\"\n\n[experiment]\nkind = \"neumann_check\"\n  instancez = 3\n";
    match Scenario::from_toml(src) {
        Err(ScenarioError::Config { line, column, message }) => {
            assert_eq!((line, column), (5, 3));
            assert!(message.contains("instancez"), "{message}");
        }
        other => panic!("expected a config error, got {other:?}"),
    }
    let src = "id = \"bad\"\nseeed = 3\n[experiment]\nkind = \"neumann_check\"\n";
    match Scenario::from_toml(src) {
        Err(ScenarioError::Config { line, column, .. }) => assert_eq!((line, column), (2, 1)),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn malformed_scenarios_are_rejected() {
    let base = "[experiment]\nkind = \"neumann_check\"\n";
    for src in [
        format!("id = \"has space\"\n{base}"),
        format!("id = \"\"\n{base}"),
        format!("id = \"x\"\n{base}[sweep]\nparam = \"rate\"\nvalues = []\n"),
        format!("id = \"x\"\n{base}[sweep]\nparam = \"bogus\"\nvalues = [1.0]\n"),
        "id = \"x\"\n[experiment]\nkind = \"no_such_kind\"\n".to_string(),
        "id = \"x\"\n".to_string(),
    ] {
        assert!(
            matches!(Scenario::from_toml(&src), Err(ScenarioError::Config { .. })),
            "accepted:\n{src}"
        );
    }
}

#[test]
fn set_param_rewrites_rates_and_scales() {
    let mut sc = Scenario::from_toml(&small_telegraph(1000)).unwrap();
    sc.set_param("rate", 3.5).unwrap();
    sc.set_param("rate_scale", 2.0).unwrap();
    let Experiment::InvariantDensity { system, .. } = &sc.experiment else {
        panic!("wrong kind");
    };
    let RatesConfig::Matrix(m) = &system.rates else {
        panic!("wrong rates");
    };
    assert_eq!(m, &vec![vec![0.0, 3.5], vec![3.5, 0.0]]);
    let a = system.constant_rates().unwrap();
    assert_eq!(a[(0, 1)], 7.0);
    assert_eq!(a[(0, 0)], 0.0);
    assert!(matches!(sc.set_param("s", 1.0), Err(ScenarioError::UnknownParam { .. })));
    assert!(matches!(
        sc.set_param("width", 1.0),
        Err(ScenarioError::UnknownParam { .. })
    ));
    let mut n = Scenario::from_toml(shipped("neumann_check").unwrap()).unwrap();
    assert!(matches!(n.set_param("rate", 1.0), Err(ScenarioError::UnknownParam { .. })));
}

#[test]
fn content_hash_is_git_style_sha256() {
    // sha256(b"blob 0\0") and sha256(b"blob 9\0id = \"x\"\n"), from Python's hashlib.
    assert_eq!(content_hash(b""), "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813");
    assert_eq!(
        content_hash(b"id = \"x\"\n"),
        "f1939205831131123e6c08e6f89f5ca497b2b110e522eaf507b66994d779c097"
    );
}

#[test]
fn report_status_ignores_reported_checks() {
    let mut r = RunReport::new("a", "b", "", 0);
    assert_eq!(r.status(), Status::Pass);
    r.report_only("x", Status::Fail, "");
    assert_eq!(r.status(), Status::Pass);
    r.check("y", Status::Inconclusive, "");
    assert_eq!(r.status(), Status::Inconclusive);
    r.check("z", Status::Fail, "");
    assert_eq!(r.status().exit_code(), 1);
    assert_eq!(Status::Inconclusive.exit_code(), 2);
    r.int("n", 3);
    assert_eq!(r.value("n"), Some(3.0));
    let text = r.render();
    assert!(text.contains("[metrics]") && text.contains("[checks]") && text.contains("(reported)"));
}

#[test]
fn runs_are_byte_reproducible_per_seed() {
    let src = small_telegraph(20_000);
    let sc = Scenario::from_toml(&src).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let dirs = ["a", "b", "c"].map(|d| tmp.path().join(d));
    let mut opts = RunOpts::new(&dirs[0]);
    let r1 = run(&sc, &src, &opts).unwrap();
    opts.out_root = dirs[1].clone();
    let r2 = run(&sc, &src, &opts).unwrap();
    opts.out_root = dirs[2].clone();
    opts.seed = Some(7);
    let r3 = run(&sc, &src, &opts).unwrap();
    assert_eq!(r1.metrics, r2.metrics);
    assert_eq!(r1.config_hash, content_hash(src.as_bytes()));
    for name in ["metrics.csv", "density.csv", "probe0.csv"] {
        assert_eq!(read(&dirs[0].join("small"), name), read(&dirs[1].join("small"), name), "{name}");
    }
    assert_ne!(read(&dirs[0].join("small"), "density.csv"), read(&dirs[2].join("small"), "density.csv"));
    assert_eq!(r3.seed, 7);
    assert!(read(&dirs[0].join("small"), "plot.gp").starts_with(b"set datafile separator"));
}

#[test]
fn sweeps_write_one_directory_per_value_and_a_summary() {
    let src = small_telegraph(10_000);
    let sc = Scenario::from_toml(&src).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let opts = RunOpts::new(tmp.path());
    let rep = sweep(&sc, &src, "rate", &[1.0, 2.0, 3.0], &opts).unwrap();
    let root = tmp.path().join("small");
    for i in 0..3 {
        assert!(root.join(format!("rate_{i:02}")).join("metrics.csv").exists());
    }
    let summary = String::from_utf8(read(&root, "sweep.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
    assert!(summary.starts_with("value,metric,metric_value,verdict"));
    assert_eq!(rep.value("sweep_points"), Some(3.0));
    let again = sweep(&sc, &src, "rate", &[1.0, 2.0, 3.0], &RunOpts::new(tmp.path().join("x"))).unwrap();
    assert_eq!(rep.metrics, again.metrics);
    assert!(matches!(
        sweep(&sc, &src, "rate", &[], &opts),
        Err(ScenarioError::Config { .. })
    ));
}

#[test]
fn cli_runs_lists_and_reports_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_switchlab");
    let tmp = tempfile::tempdir().unwrap();

    let out = Command::new(exe).arg("list-scenarios").output().unwrap();
    assert!(out.status.success());
    let listing = String::from_utf8(out.stdout).unwrap();
    for (id, _) in SHIPPED {
        assert!(listing.contains(id), "{id} missing from listing");
    }

    let out = Command::new(exe)
        .args(["run", "neumann_check", "--threads", "1"])
        .env("SWITCHLAB_OUT", tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("neumann_check").join("report.txt").exists());

    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "id = \"bad\"\n[experiment]\nkind = \"neumann_check\"\nstates = \"five\"\n").unwrap();
    let out = Command::new(exe)
        .args(["run", bad.to_str().unwrap(), "--out-dir"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config error"));

    let file = tmp.path().join("small.toml");
    fs::write(&file, small_telegraph(10_000)).unwrap();
    let out = Command::new(exe)
        .args(["sweep", file.to_str().unwrap(), "--param", "rate", "--values", "1,2", "--seed", "3", "--out-dir"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.code() != Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("small").join("sweep.csv").exists());
}
