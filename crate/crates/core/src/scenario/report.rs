use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::ScenarioError;

/// Outcome of a run or of one of its checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Pass,
    Inconclusive,
    Fail,
}

impl Status {
    /// Exit status of the command line tool.
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Inconclusive => 2,
            Status::Fail => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Inconclusive => "inconclusive",
            Status::Fail => "fail",
        }
    }

    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Metric {
    Num(f64),
    Int(i64),
    Text(String),
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Metric::Num(v) => write!(f, "{v}"),
            Metric::Int(v) => write!(f, "{v}"),
            Metric::Text(s) => write!(f, "{s:?}"),
        }
    }
}

/// One named expectation. Reported checks are printed but do not enter the
/// overall status.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub asserted: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    pub experiment: String,
    /// `sha256("blob <len>\0" + config bytes)`.
    pub config_hash: String,
    pub seed: u64,
    pub metrics: Vec<(String, Metric)>,
    pub checks: Vec<Check>,
    pub wall_time: f64,
    pub budget_seconds: Option<f64>,
}

/// Git-style content hash of a config file, with SHA-256 in place of SHA-1.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl RunReport {
    pub fn new(scenario: &str, experiment: &str, config: &str, seed: u64) -> Self {
        RunReport {
            scenario: scenario.to_string(),
            experiment: experiment.to_string(),
            config_hash: content_hash(config.as_bytes()),
            seed,
            metrics: Vec::new(),
            checks: Vec::new(),
            wall_time: 0.0,
            budget_seconds: None,
        }
    }

    pub fn num(&mut self, key: impl Into<String>, v: f64) {
        self.metrics.push((key.into(), Metric::Num(v)));
    }

    pub fn int(&mut self, key: impl Into<String>, v: i64) {
        self.metrics.push((key.into(), Metric::Int(v)));
    }

    pub fn text(&mut self, key: impl Into<String>, v: impl Into<String>) {
        self.metrics.push((key.into(), Metric::Text(v.into())));
    }

    pub fn check(&mut self, name: impl Into<String>, status: Status, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            status,
            asserted: true,
            detail: detail.into(),
        });
    }

    pub fn report_only(&mut self, name: impl Into<String>, status: Status, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            status,
            asserted: false,
            detail: detail.into(),
        });
    }

    pub fn metric(&self, key: &str) -> Option<&Metric> {
        self.metrics.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    /// Numeric metric, with integers widened.
    pub fn value(&self, key: &str) -> Option<f64> {
        match self.metric(key)? {
            Metric::Num(v) => Some(*v),
            Metric::Int(v) => Some(*v as f64),
            Metric::Text(_) => None,
        }
    }

    pub fn check_status(&self, name: &str) -> Option<Status> {
        self.checks.iter().find(|c| c.name == name).map(|c| c.status)
    }

    /// Worst status over asserted checks.
    pub fn status(&self) -> Status {
        self.checks
            .iter()
            .filter(|c| c.asserted)
            .map(|c| c.status)
            .max()
            .unwrap_or(Status::Pass)
    }

    pub fn within_budget(&self) -> bool {
        self.budget_seconds.is_none_or(|b| self.wall_time <= b)
    }

    /// `key = value` rendering with `[metrics]` and `[checks]` sections.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario = {:?}", self.scenario);
        let _ = writeln!(s, "experiment = {:?}", self.experiment);
        let _ = writeln!(s, "config_hash = {:?}", self.config_hash);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "status = {:?}", self.status().as_str());
        let _ = writeln!(s, "wall_time_seconds = {:.3}", self.wall_time);
        if let Some(b) = self.budget_seconds {
            let _ = writeln!(s, "budget_seconds = {b}");
            let _ = writeln!(s, "within_budget = {}", self.within_budget());
        }
        let _ = writeln!(s, "\n[metrics]");
        for (k, v) in &self.metrics {
            let _ = writeln!(s, "{k} = {v}");
        }
        let _ = writeln!(s, "\n[checks]");
        for c in &self.checks {
            let tag = if c.asserted { "" } else { " (reported)" };
            let _ = writeln!(s, "{} = {:?}", c.name, format!("{}{tag}: {}", c.status.as_str(), c.detail));
        }
        s
    }

    /// Metrics as a two-column CSV; unlike the rendered report it carries no
    /// timing and is byte-reproducible.
    pub fn metrics_csv(&self) -> String {
        let mut s = String::from("key,value\n");
        for (k, v) in &self.metrics {
            let v = match v {
                Metric::Text(t) => t.clone(),
                other => other.to_string(),
            };
            let _ = writeln!(s, "{k},{v}");
        }
        s
    }
}

/// Output directory of one run, tracking two-column series for the plot
/// script.
#[derive(Debug)]
pub struct Outputs {
    pub dir: PathBuf,
    series: Vec<(String, String)>,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self, ScenarioError> {
        fs::create_dir_all(dir).map_err(|e| ScenarioError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            series: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn file(&self, name: &str) -> Result<fs::File, ScenarioError> {
        let p = self.path(name);
        fs::File::create(&p).map_err(|e| ScenarioError::Io(format!("{}: {e}", p.display())))
    }

    /// Write a CSV table from a header and rows of already formatted cells.
    pub fn table(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), ScenarioError> {
        let io = |e: csv::Error| ScenarioError::Io(e.to_string());
        let mut w = csv::Writer::from_writer(self.file(name)?);
        w.write_record(header).map_err(io)?;
        for r in rows {
            w.write_record(r).map_err(io)?;
        }
        w.flush().map_err(|e| ScenarioError::Io(e.to_string()))
    }

    /// Two-column series, also listed in `plot.gp`.
    pub fn series(&mut self, name: &str, x: &str, y: &str, points: &[(f64, f64)]) -> Result<(), ScenarioError> {
        let rows: Vec<Vec<String>> = points.iter().map(|(a, b)| vec![a.to_string(), b.to_string()]).collect();
        self.table(name, &[x, y], &rows)?;
        self.series.push((name.to_string(), format!("{y} vs {x}")));
        Ok(())
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<(), ScenarioError> {
        let p = self.path(name);
        fs::write(&p, text).map_err(|e| ScenarioError::Io(format!("{}: {e}", p.display())))
    }

    /// Gnuplot script plotting every registered series.
    pub fn finish(&self) -> Result<(), ScenarioError> {
        if self.series.is_empty() {
            return Ok(());
        }
        let mut s = String::from("set datafile separator ','\nset key autotitle columnhead\n");
        for (name, title) in &self.series {
            let _ = writeln!(s, "set title {title:?}\nplot {name:?} using 1:2 with linespoints\npause -1");
        }
        self.write_text("plot.gp", &s)
    }
}
