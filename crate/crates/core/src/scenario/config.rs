use std::path::Path;

use nalgebra::{DMatrix, Matrix2};
use serde::Deserialize;

use super::ScenarioError;
use crate::density::{Region, VerdictThresholds};
use crate::ergodic::OrbitCandidate;
use crate::geometry::{
    flow_map_as_function, FieldSpec, IntegratorOpts, MapHandle, Space,
};
use crate::pdmp::{Characteristics, Estimator, HistGrid, McOpts, RateEntry, RateFn, Rates};

/// Keys accepted by [`Scenario::set_param`].
pub const SWEEPABLE: [&str; 4] = ["rate", "rate_scale", "alpha", "s"];

/// A scenario file: one experiment, its seed and an optional declared sweep.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    /// Expected wall time on a desktop machine; exceeding it is reported.
    pub budget_seconds: Option<f64>,
    pub experiment: Experiment,
    pub sweep: Option<SweepSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    SpectralRadius {
        map: MapConfig,
        ks: Vec<usize>,
        #[serde(default = "d_2048")]
        n: usize,
        #[serde(default = "d_40")]
        n_iter: usize,
        #[serde(default = "d_5")]
        n_probes: usize,
        expect: Option<Vec<f64>>,
        #[serde(default = "d_rel")]
        rel_tol: f64,
    },
    ExpansionRates {
        map: MapConfig,
        ks: Vec<u32>,
        #[serde(default = "d_512")]
        grid_res: usize,
        #[serde(default = "d_30")]
        n_max: usize,
        expect: Option<Vec<f64>>,
        #[serde(default = "d_rel")]
        rel_tol: f64,
    },
    OrbitFloquet {
        space: Space,
        field: FieldSpec,
        candidates: Vec<OrbitCandidate>,
        ks: Vec<u32>,
        #[serde(default = "d_16")]
        grid_res: usize,
        #[serde(default = "d_30")]
        n_max: usize,
        /// Integrator step for orbit detection and the Liouville check.
        #[serde(default = "d_fine_step")]
        step: f64,
        /// Integrator step of the time-one map used for expansion rates.
        #[serde(default = "d_step")]
        map_step: f64,
        #[serde(default = "d_rel")]
        rel_tol: f64,
        #[serde(default = "d_ergplan")]
        ergplan_tol: f64,
    },
    InvariantDensity {
        system: SystemConfig,
        mc: McConfig,
        ladder: Vec<usize>,
        #[serde(default)]
        probes: Vec<ProbeSpec>,
        compare: Option<CompareSpec>,
        #[serde(default)]
        thresholds: VerdictThresholds,
    },
    ThresholdSweep {
        system: SystemConfig,
        source: DensitySource,
        ladder: Vec<usize>,
        k: usize,
        #[serde(default)]
        region: Region,
        /// Sweep values at or above this must read as bounded.
        bounded_from: f64,
        #[serde(default)]
        thresholds: VerdictThresholds,
    },
    FastSwitchingSweep {
        system: SystemConfig,
        source: DensitySource,
        ladder: Vec<usize>,
        k_max: usize,
        #[serde(default)]
        region: Region,
        #[serde(default)]
        thresholds: VerdictThresholds,
    },
    BlowupAffine {
        system: SystemConfig,
        mc: McConfig,
        ladder: Vec<usize>,
        anchors: Vec<AnchorSpec>,
        expect_flagged: bool,
        #[serde(default = "d_one_usize")]
        bracket_generation: usize,
        #[serde(default = "d_100")]
        bracket_grid: usize,
    },
    GammaSupport {
        system: SystemConfig,
        mc: McConfig,
        #[serde(default = "d_support_threshold")]
        threshold: f64,
        #[serde(default = "d_3")]
        seeds_per_axis: usize,
        #[serde(default = "d_dt")]
        dt: f64,
        #[serde(default = "d_max_iter")]
        max_iter: usize,
        #[serde(default = "d_cover")]
        cover_min: f64,
        #[serde(default = "d_symdiff")]
        symdiff_max: f64,
    },
    NeumannCheck {
        #[serde(default = "d_20")]
        instances: usize,
        #[serde(default = "d_5")]
        states: usize,
        #[serde(default = "d_residual")]
        residual_tol: f64,
        #[serde(default = "d_oracle")]
        oracle_tol: f64,
    },
    TelegraphOracle {
        system: SystemConfig,
        mc: McConfig,
        #[serde(default = "d_64")]
        l1_bins: usize,
        #[serde(default = "d_l1")]
        l1_max: f64,
        ladder: Vec<usize>,
        #[serde(default = "d_kmax")]
        k_max: usize,
        #[serde(default)]
        thresholds: VerdictThresholds,
    },
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::SpectralRadius { .. } => "spectral_radius",
            Experiment::ExpansionRates { .. } => "expansion_rates",
            Experiment::OrbitFloquet { .. } => "orbit_floquet",
            Experiment::InvariantDensity { .. } => "invariant_density",
            Experiment::ThresholdSweep { .. } => "threshold_sweep",
            Experiment::FastSwitchingSweep { .. } => "fast_switching_sweep",
            Experiment::BlowupAffine { .. } => "blowup_affine",
            Experiment::GammaSupport { .. } => "gamma_support",
            Experiment::NeumannCheck { .. } => "neumann_check",
            Experiment::TelegraphOracle { .. } => "telegraph_oracle",
        }
    }

    fn system_mut(&mut self) -> Option<&mut SystemConfig> {
        match self {
            Experiment::InvariantDensity { system, .. }
            | Experiment::ThresholdSweep { system, .. }
            | Experiment::FastSwitchingSweep { system, .. }
            | Experiment::BlowupAffine { system, .. }
            | Experiment::GammaSupport { system, .. }
            | Experiment::TelegraphOracle { system, .. } => Some(system),
            _ => None,
        }
    }

    fn fields_mut(&mut self) -> Vec<&mut FieldSpec> {
        match self {
            Experiment::SpectralRadius { map, .. } | Experiment::ExpansionRates { map, .. } => {
                match map {
                    MapConfig::Flow { field, .. } => vec![field],
                    _ => vec![],
                }
            }
            Experiment::OrbitFloquet { field, .. } => vec![field],
            other => other
                .system_mut()
                .map(|s| s.fields.iter_mut().collect())
                .unwrap_or_default(),
        }
    }
}

/// Self-maps that can be named in a scenario file.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapConfig {
    Identity { space: Space },
    Rotation { theta: f64 },
    Expanding { m: u32 },
    Linear { space: Space, m: [[f64; 2]; 2] },
    Flow {
        space: Space,
        field: FieldSpec,
        #[serde(default = "d_one")]
        t: f64,
        #[serde(default = "d_fine_step")]
        step: f64,
    },
}

impl MapConfig {
    pub fn build(&self) -> Result<MapHandle, ScenarioError> {
        Ok(match self {
            MapConfig::Identity { space } => MapHandle::Identity {
                space: space.clone(),
            },
            MapConfig::Rotation { theta } => MapHandle::Rotation { theta: *theta },
            MapConfig::Expanding { m } => MapHandle::Expanding { m: *m },
            MapConfig::Linear { space, m } => MapHandle::Linear {
                space: space.clone(),
                m: Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1]),
            },
            MapConfig::Flow {
                space,
                field,
                t,
                step,
            } => flow_map_as_function(space, field, *t, &IntegratorOpts::with_step(*step))?,
        })
    }
}

/// Switching rates: a full matrix or a list of `(from, to, rate)` entries.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum RatesConfig {
    Matrix(Vec<Vec<f64>>),
    Entries(Vec<RateEntry>),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub space: Space,
    pub fields: Vec<FieldSpec>,
    pub rates: RatesConfig,
    /// Multiplies every rate.
    #[serde(default = "d_one")]
    pub rate_scale: f64,
    /// Intensity bound of the embedded chain; defaults to a margin over the
    /// largest exit rate.
    pub alpha: Option<f64>,
    #[serde(default = "d_step")]
    pub step: f64,
}

impl SystemConfig {
    pub fn rates(&self) -> Result<Rates, ScenarioError> {
        let m = self.fields.len();
        Ok(match &self.rates {
            RatesConfig::Matrix(rows) => {
                if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                    return Err(ScenarioError::Invalid(format!(
                        "rate matrix must be {m}x{m} to match the fields"
                    )));
                }
                let flat: Vec<f64> = rows.iter().flatten().map(|v| v * self.rate_scale).collect();
                Rates::Constant(DMatrix::from_row_slice(m, m, &flat))
            }
            RatesConfig::Entries(entries) => Rates::StateDependent(
                entries
                    .iter()
                    .map(|e| RateEntry {
                        from: e.from,
                        to: e.to,
                        rate: scale_rate(&e.rate, self.rate_scale),
                    })
                    .collect(),
            ),
        })
    }

    /// Constant rate matrix, or an error for state-dependent rates.
    pub fn constant_rates(&self) -> Result<DMatrix<f64>, ScenarioError> {
        match self.rates()? {
            Rates::Constant(a) => Ok(a),
            Rates::StateDependent(_) => Err(ScenarioError::Invalid(
                "this experiment needs a constant rate matrix".into(),
            )),
        }
    }

    pub fn characteristics(&self) -> Result<Characteristics, ScenarioError> {
        Ok(Characteristics::new(
            self.space.clone(),
            self.fields.clone(),
            self.rates()?,
            self.alpha,
            IntegratorOpts::with_step(self.step),
            true,
        )?)
    }
}

fn scale_rate(r: &RateFn, s: f64) -> RateFn {
    match r {
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
            axis: *axis,
            freq: *freq,
            phase: *phase,
        },
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub events: u64,
    pub bins: usize,
    #[serde(default = "d_estimator")]
    pub estimator: Estimator,
    #[serde(default = "d_4")]
    pub chains: usize,
    #[serde(default = "d_burn")]
    pub burn_in: u64,
    /// Project onto this axis before estimating densities.
    pub marginal: Option<usize>,
}

impl McConfig {
    pub fn opts(&self, space: &Space, seed: u64) -> McOpts {
        let mut o = McOpts::new(self.events, HistGrid::for_space(space, self.bins), self.estimator, seed);
        o.n_chains = self.chains;
        o.burn_in = self.burn_in;
        o
    }
}

/// Where a smoothness experiment takes its density from.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySource {
    Mc(McConfig),
    /// Deterministic stationary density of the marginal along `axis`, valid
    /// when no field depends on the other coordinate.
    TransferMarginal {
        axis: usize,
        #[serde(default = "d_2048")]
        nodes: usize,
        #[serde(default = "d_transfer_tol")]
        tol: f64,
        #[serde(default = "d_transfer_iter")]
        max_iter: usize,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub k: usize,
    #[serde(default)]
    pub region: Region,
}

/// Second estimator run against the main one, compared by L1 distance.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSpec {
    pub estimator: Estimator,
    pub l1_max: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorSpec {
    pub mode: usize,
    pub point: Vec<f64>,
}

fn d_one() -> f64 {
    1.0
}
fn d_one_usize() -> usize {
    1
}
fn d_3() -> usize {
    3
}
fn d_4() -> usize {
    4
}
fn d_5() -> usize {
    5
}
fn d_16() -> usize {
    16
}
fn d_20() -> usize {
    20
}
fn d_30() -> usize {
    30
}
fn d_40() -> usize {
    40
}
fn d_64() -> usize {
    64
}
fn d_100() -> usize {
    100
}
fn d_512() -> usize {
    512
}
fn d_2048() -> usize {
    2048
}
fn d_kmax() -> usize {
    3
}
fn d_rel() -> f64 {
    0.1
}
fn d_step() -> f64 {
    1e-2
}
fn d_fine_step() -> f64 {
    1e-3
}
fn d_ergplan() -> f64 {
    1e-6
}
fn d_support_threshold() -> f64 {
    1e-9
}
fn d_dt() -> f64 {
    0.1
}
fn d_max_iter() -> usize {
    100_000
}
fn d_cover() -> f64 {
    0.95
}
fn d_symdiff() -> f64 {
    0.02
}
fn d_residual() -> f64 {
    1e-12
}
fn d_oracle() -> f64 {
    1e-10
}
fn d_l1() -> f64 {
    0.05
}
fn d_estimator() -> Estimator {
    Estimator::Continuous
}
fn d_burn() -> u64 {
    1000
}
fn d_transfer_tol() -> f64 {
    1e-12
}
fn d_transfer_iter() -> usize {
    100_000
}

/// 1-based line and column of a byte offset.
fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, col)
}

/// Narrow an error span to the offending key when the message names one.
/// The search runs from the start of the span to the end of the file.
fn refine_span(src: &str, span: std::ops::Range<usize>, msg: &str) -> usize {
    let key = msg
        .split("unknown field `")
        .nth(1)
        .and_then(|rest| rest.split('`').next());
    let Some(key) = key else {
        return span.start;
    };
    let region = &src[span.start.min(src.len())..];
    let mut pos = 0;
    while let Some(found) = region[pos..].find(key) {
        let at = pos + found;
        let before_ok = at == 0
            || !region.as_bytes()[at - 1].is_ascii_alphanumeric() && region.as_bytes()[at - 1] != b'_';
        let after = region[at + key.len()..].trim_start();
        if before_ok && after.starts_with('=') {
            return span.start + at;
        }
        pos = at + key.len();
    }
    span.start
}

impl Scenario {
    pub fn from_toml(src: &str) -> Result<Self, ScenarioError> {
        let sc: Scenario = toml::from_str(src).map_err(|e| {
            let msg = e.message().to_string();
            let (line, column) = match e.span() {
                Some(span) => line_col(src, refine_span(src, span, &msg)),
                None => (0, 0),
            };
            ScenarioError::Config { line, column, message: msg }
        })?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<(Self, String), ScenarioError> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))?;
        Ok((Scenario::from_toml(&src)?, src))
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Config { line: 0, column: 0, message: m });
        if self.id.is_empty() || !self.id.chars().all(|c| c.is_ascii_alphanumeric() || "._-".contains(c)) {
            return bad(format!("scenario id `{}` must be nonempty and use [A-Za-z0-9._-]", self.id));
        }
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() {
                return bad("sweep needs at least one value".into());
            }
            if !SWEEPABLE.contains(&sw.param.as_str()) {
                return bad(format!("`{}` is not sweepable (expected one of {SWEEPABLE:?})", sw.param));
            }
        }
        Ok(())
    }

    /// Override a sweepable parameter.
    ///
    /// `rate` sets every off-diagonal entry of a constant rate matrix,
    /// `rate_scale` multiplies all rates, `alpha` sets the intensity bound (or
    /// the countercampbell parameter for map experiments) and `s` sets every
    /// shear amplitude.
    pub fn set_param(&mut self, key: &str, value: f64) -> Result<(), ScenarioError> {
        let kind = self.experiment.kind();
        let unknown = || ScenarioError::UnknownParam {
            param: key.to_string(),
            experiment: kind.to_string(),
        };
        match key {
            "rate" => {
                let sys = self.experiment.system_mut().ok_or_else(unknown)?;
                let RatesConfig::Matrix(rows) = &mut sys.rates else {
                    return Err(unknown());
                };
                for (i, row) in rows.iter_mut().enumerate() {
                    for (j, v) in row.iter_mut().enumerate() {
                        if i != j {
                            *v = value;
                        }
                    }
                }
            }
            "rate_scale" => {
                self.experiment.system_mut().ok_or_else(unknown)?.rate_scale = value;
            }
            "alpha" => {
                if let Some(sys) = self.experiment.system_mut() {
                    sys.alpha = Some(value);
                } else {
                    let mut hit = false;
                    for f in self.experiment.fields_mut() {
                        if let FieldSpec::CounterCampbell { alpha } = f {
                            *alpha = value;
                            hit = true;
                        }
                    }
                    if !hit {
                        return Err(unknown());
                    }
                }
            }
            "s" => {
                let mut hit = false;
                for f in self.experiment.fields_mut() {
                    if let FieldSpec::ShearSin { s, .. } = f {
                        *s = value;
                        hit = true;
                    }
                }
                if !hit {
                    return Err(unknown());
                }
            }
            _ => return Err(unknown()),
        }
        Ok(())
    }
}
