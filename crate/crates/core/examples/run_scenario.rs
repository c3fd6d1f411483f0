//! Load a shipped scenario, run it into a temporary directory and print the
//! report, then sweep it over a parameter.

use switchlab::scenario::{run, shipped, sweep, RunOpts, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let id = std::env::args().nth(1).unwrap_or_else(|| "neumann_check".into());
    let src = shipped(&id).ok_or("unknown scenario id")?;
    let sc = Scenario::from_toml(src)?;
    let out = std::env::temp_dir().join("switchlab-example");
    let report = run(&sc, src, &RunOpts::new(&out))?;
    print!("{}", report.render());
    println!("status {:?}, files under {}", report.status(), out.join(&sc.id).display());

    let kernel = shipped("kernel_telegraph").ok_or("missing scenario")?;
    let mut sc = Scenario::from_toml(kernel)?;
    if let switchlab::scenario::Experiment::InvariantDensity { mc, .. } = &mut sc.experiment {
        mc.events = 100_000;
    }
    let rep = sweep(&sc, kernel, "rate", &[0.5, 2.0], &RunOpts::new(&out))?;
    for (k, v) in &rep.metrics {
        println!("{k} = {v}");
    }
    Ok(())
}
