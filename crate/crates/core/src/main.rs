use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use switchlab::scenario::{self, RunOpts, RunReport, Scenario, ScenarioError, Status, SHIPPED};

/// Numerical laboratory for invariant densities of randomly switched flows.
#[derive(Parser)]
#[command(name = "switchlab", version)]
struct Cli {
    /// Master seed, replacing the one in the scenario file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output root; defaults to $SWITCHLAB_OUT, then ./switchlab-out.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for sweeps and Monte Carlo chains.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario file, or a shipped scenario by id.
    Run { file: String },
    /// Run a scenario once per value of a parameter.
    Sweep {
        file: String,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// List the shipped scenarios.
    ListScenarios,
}

fn load(file: &str) -> Result<(Scenario, String), ScenarioError> {
    let path = Path::new(file);
    if !path.exists() {
        if let Some(src) = scenario::shipped(file) {
            return Ok((Scenario::from_toml(src)?, src.to_string()));
        }
    }
    Scenario::load(path)
}

fn print_report(rep: &RunReport, opts: &RunOpts) {
    print!("{}", rep.render());
    println!("\noutput = {:?}", opts.out_root.join(&rep.scenario).display().to_string());
    if !rep.within_budget() {
        eprintln!(
            "warning: wall time {:.1} s exceeded the budget of {} s",
            rep.wall_time,
            rep.budget_seconds.unwrap_or_default()
        );
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let opts = RunOpts {
        out_root: RunOpts::default_root(cli.out_dir),
        seed: cli.seed,
    };
    let result = match cli.cmd {
        Cmd::ListScenarios => {
            for (id, src) in SHIPPED {
                match Scenario::from_toml(src) {
                    Ok(sc) => println!("{id:<28} {:<22} {}", sc.experiment.kind(), sc.description),
                    Err(e) => println!("{id:<28} invalid: {e}"),
                }
            }
            return ExitCode::SUCCESS;
        }
        Cmd::Run { file } => load(&file).and_then(|(sc, src)| scenario::run(&sc, &src, &opts)),
        Cmd::Sweep {
            file,
            param,
            values,
        } => load(&file).and_then(|(sc, src)| scenario::sweep(&sc, &src, &param, &values, &opts)),
    };
    match result {
        Ok(rep) => {
            print_report(&rep, &opts);
            ExitCode::from(rep.status().exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(Status::Fail.exit_code() as u8)
        }
    }
}
