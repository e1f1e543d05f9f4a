//! Declarative experiment specs, scenario execution and artifact output.

mod scenarios;

use crate::dissipation::EntropyPair;
use crate::error::{Error, Result};
use crate::initial::InitialVelocity;
use crate::monte_carlo::{Gaussian, VelocitySource};
use crate::presets;
use crate::transport::Passive;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub use scenarios::Outcome;

/// Environment variable that overrides `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "BURGERS_LAB_OUTPUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 2;
pub const EXIT_TOLERANCE: i32 = 3;
pub const EXIT_CONFIG: i32 = 64;
pub const EXIT_IO: i32 = 74;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    pub scenario: Scenario,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Initial data given by preset name or explicitly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DataSpec {
    Preset { preset: String },
    Explicit(InitialVelocity),
}

impl DataSpec {
    pub fn preset(name: &str) -> Self {
        DataSpec::Preset { preset: name.into() }
    }

    pub fn build(&self) -> Result<InitialVelocity> {
        match self {
            DataSpec::Preset { preset } => presets::by_name(preset),
            DataSpec::Explicit(v) => Ok(v.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnomalySuite {
    pub initial: DataSpec,
    pub horizon_time: f64,
    pub sample_times: Vec<f64>,
    pub entropies: Vec<EntropyPair>,
    /// Times in the monotonicity profile of each final shock.
    pub monotone_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MartingaleCase {
    pub initial: DataSpec,
    /// Defaults to the data time.
    #[serde(default)]
    pub reference_time: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometricMartingale {
    pub cases: Vec<MartingaleCase>,
    pub horizon_time: f64,
    /// Defaults to the single shock alive at the horizon.
    #[serde(default)]
    pub shock_id: Option<usize>,
    pub paths: usize,
    pub snapshot_times: Vec<f64>,
    /// Paths written to the per-case path table.
    pub written_paths: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitMeasures {
    pub length_scale: f64,
    pub data_time: f64,
    pub x_position: f64,
    pub s_time: f64,
    pub t_time: f64,
    /// Strictly decreasing.
    pub viscosities: Vec<f64>,
    pub shock_frame_fractions: Vec<f64>,
    pub search_half_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CiFixedPoint {
    pub length_scale: f64,
    pub nu_viscosity: f64,
    pub prandtl_number: f64,
    pub s_time: f64,
    pub t_time: f64,
    pub x_positions: Vec<f64>,
    pub paths: usize,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KhokhlovEscapeSweep {
    pub length_scale: f64,
    pub prandtl_number: f64,
    pub log_time_horizon: f64,
    pub epsilon: f64,
    pub kappa_diffusivities: Vec<f64>,
    pub paths: usize,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EscapeScaling {
    pub prandtl_number: f64,
    pub kappa_diffusivities: Vec<f64>,
    pub paths: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EscapeSweep {
    pub amplitude_velocity: f64,
    pub horizon_time: f64,
    pub epsilon: f64,
    pub prandtl_numbers: Vec<f64>,
    pub kappa_diffusivities: Vec<f64>,
    pub paths: usize,
    pub steps: usize,
    #[serde(default)]
    pub khokhlov: Option<KhokhlovEscapeSweep>,
    #[serde(default)]
    pub scaling: Option<EscapeScaling>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportSuite {
    pub initial: DataSpec,
    pub horizon_time: f64,
    pub rho0: Passive,
    pub theta0: Passive,
    pub entropy: EntropyPair,
    pub times: Vec<f64>,
    /// Label window `[lo, hi]` used for mass and invariant balances.
    pub label_window: [f64; 2],
    pub profile_points: usize,
    /// Space-time box `[x_lo, x_hi, t_lo, t_hi]` for weak-form test bumps; omitted to skip.
    #[serde(default)]
    pub bump_box: Option<[f64; 4]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fluctuation {
    pub source: VelocitySource,
    pub nu_viscosity: f64,
    pub start_time: f64,
    pub end_time: f64,
    pub rho0: Gaussian,
    pub rho_final: Gaussian,
    pub steps: usize,
    pub paths: usize,
    pub variance_cap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    AnomalySuite(AnomalySuite),
    GeometricMartingale(GeometricMartingale),
    LimitMeasures(LimitMeasures),
    CiFixedPoint(CiFixedPoint),
    EscapeSweep(EscapeSweep),
    TransportSuite(TransportSuite),
    Fluctuation(Fluctuation),
}

/// Catalog entry for `list`.
#[derive(Clone, Debug, Serialize)]
pub struct CatalogEntry {
    pub kind: &'static str,
    pub topic: &'static str,
    pub example: Scenario,
}

pub fn catalog() -> Vec<CatalogEntry> {
    use Scenario as S;
    vec![
        CatalogEntry {
            kind: "anomaly_suite",
            topic: "Lagrangian vs Eulerian dissipation rates, momentum conservation, monotone interpolation",
            example: S::AnomalySuite(AnomalySuite {
                initial: DataSpec::preset("riemann"),
                horizon_time: 2.0,
                sample_times: vec![0.5, 1.0, 1.5],
                entropies: vec![EntropyPair::Energy, EntropyPair::Quartic, EntropyPair::Abs],
                monotone_samples: 200,
            }),
        },
        CatalogEntry {
            kind: "geometric_martingale",
            topic: "backward geometric flow on shocks: martingale checks and merger branching",
            example: S::GeometricMartingale(GeometricMartingale {
                cases: vec![
                    MartingaleCase { initial: DataSpec::preset("sawtooth"), reference_time: None },
                    MartingaleCase {
                        initial: DataSpec::Explicit(InitialVelocity::sawtooth(1.0, 0.5).expect("valid")),
                        reference_time: None,
                    },
                ],
                horizon_time: 2.0,
                shock_id: None,
                paths: 100_000,
                snapshot_times: vec![0.6, 0.9, 1.2, 1.5, 1.9],
                written_paths: 1000,
            }),
        },
        CatalogEntry {
            kind: "limit_measures",
            topic: "zero-viscosity limits of the backward transition law at a shock",
            example: S::LimitMeasures(LimitMeasures {
                length_scale: 1.0,
                data_time: 0.1,
                x_position: 0.0,
                s_time: 0.5,
                t_time: 1.0,
                viscosities: vec![0.1, 0.05, 0.02, 0.01],
                shock_frame_fractions: vec![0.25, 0.75],
                search_half_width: 3.0,
            }),
        },
        CatalogEntry {
            kind: "ci_fixed_point",
            topic: "stochastic Lagrangian representation of the viscous velocity",
            example: S::CiFixedPoint(CiFixedPoint {
                length_scale: 1.0,
                nu_viscosity: 0.1,
                prandtl_number: 1.0,
                s_time: 0.5,
                t_time: 1.0,
                x_positions: vec![-1.5, -1.0, -0.6, -0.3, -0.1, 0.0, 0.2, 0.5, 0.9, 1.4],
                paths: 10_000,
                steps: 200,
            }),
        },
        CatalogEntry {
            kind: "escape_sweep",
            topic: "escape of backward stochastic trajectories from shocks at finite Prandtl number",
            example: S::EscapeSweep(EscapeSweep {
                amplitude_velocity: 1.0,
                horizon_time: 1.0,
                epsilon: 0.5,
                prandtl_numbers: vec![0.0, 0.5, 1.0, 2.0],
                kappa_diffusivities: vec![1e-2, 1e-3, 1e-4],
                paths: 100_000,
                steps: 100,
                khokhlov: Some(KhokhlovEscapeSweep {
                    length_scale: 1.0,
                    prandtl_number: 1.0,
                    log_time_horizon: 1.0,
                    epsilon: 0.5,
                    kappa_diffusivities: vec![1e-2, 1e-3, 1e-4],
                    paths: 20_000,
                    steps: 200,
                }),
                scaling: Some(EscapeScaling {
                    prandtl_number: 1.0,
                    kappa_diffusivities: vec![1e-2, 5e-3, 2e-3, 1e-3],
                    paths: 2000,
                }),
            }),
        },
        CatalogEntry {
            kind: "transport_suite",
            topic: "adhesion densities, momentum anomaly and passive-scalar anomalies",
            example: S::TransportSuite(TransportSuite {
                initial: DataSpec::Explicit(InitialVelocity::sawtooth(1.0, 0.5).expect("valid")),
                horizon_time: 3.0,
                rho0: Passive::Step { minus: 1.0, plus: 3.0 },
                theta0: Passive::Linear { intercept: 0.2, slope: 1.0 },
                entropy: EntropyPair::Square,
                times: vec![0.7, 1.5, 2.5],
                label_window: [-4.0, 4.0],
                profile_points: 401,
                bump_box: Some([-1.5, 1.5, 0.6, 2.9]),
            }),
        },
        CatalogEntry {
            kind: "fluctuation",
            topic: "fluctuation identity for the entropy-production functional along forward diffusions",
            example: S::Fluctuation(Fluctuation {
                source: VelocitySource::Khokhlov { length: 1.0 },
                nu_viscosity: 0.2,
                start_time: 0.5,
                end_time: 1.0,
                rho0: Gaussian { mean: 0.0, std: 0.5 },
                rho_final: Gaussian { mean: 0.0, std: 0.3 },
                steps: 500,
                paths: 10_000,
                variance_cap: 1e6,
            }),
        },
    ]
}

impl Scenario {
    pub fn kind(&self) -> &'static str {
        match self {
            Scenario::AnomalySuite(_) => "anomaly_suite",
            Scenario::GeometricMartingale(_) => "geometric_martingale",
            Scenario::LimitMeasures(_) => "limit_measures",
            Scenario::CiFixedPoint(_) => "ci_fixed_point",
            Scenario::EscapeSweep(_) => "escape_sweep",
            Scenario::TransportSuite(_) => "transport_suite",
            Scenario::Fluctuation(_) => "fluctuation",
        }
    }

    pub fn example(kind: &str) -> Option<Scenario> {
        catalog().into_iter().find(|e| e.kind == kind).map(|e| e.example)
    }
}

fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::ConfigInvalid(msg.into()))
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        config(format!("{name} must be positive and finite"))
    }
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::ConfigInvalid(e.to_string()))
    }

    /// Static checks that need no numerics.
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return config("name must not be empty");
        }
        let nonempty = |name: &str, n: usize| if n == 0 { config(format!("{name} must not be empty")) } else { Ok(()) };
        match &self.scenario {
            Scenario::AnomalySuite(p) => {
                p.initial.build().map_err(to_config)?;
                positive("horizon_time", p.horizon_time)?;
                nonempty("sample_times", p.sample_times.len())?;
                nonempty("entropies", p.entropies.len())?;
                if p.monotone_samples < 2 {
                    return config("monotone_samples must be at least 2");
                }
            }
            Scenario::GeometricMartingale(p) => {
                nonempty("cases", p.cases.len())?;
                for c in &p.cases {
                    c.initial.build().map_err(to_config)?;
                }
                positive("horizon_time", p.horizon_time)?;
                nonempty("snapshot_times", p.snapshot_times.len())?;
                if p.paths < 2 {
                    return config("paths must be at least 2");
                }
            }
            Scenario::LimitMeasures(p) => {
                for (n, v) in
                    [("length_scale", p.length_scale), ("data_time", p.data_time), ("search_half_width", p.search_half_width)]
                {
                    positive(n, v)?;
                }
                if !(p.data_time < p.s_time && p.s_time < p.t_time) {
                    return config("need data_time < s_time < t_time");
                }
                nonempty("viscosities", p.viscosities.len())?;
                if p.viscosities.windows(2).any(|w| w[1] >= w[0]) || p.viscosities.iter().any(|&v| !(v > 0.0)) {
                    return config("viscosities must be positive and strictly decreasing");
                }
                if p.shock_frame_fractions.iter().any(|&f| !(f > 0.0 && f < 1.0)) {
                    return config("shock_frame_fractions must lie in (0, 1)");
                }
            }
            Scenario::CiFixedPoint(p) => {
                positive("length_scale", p.length_scale)?;
                positive("nu_viscosity", p.nu_viscosity)?;
                positive("prandtl_number", p.prandtl_number)?;
                positive("s_time", p.s_time)?;
                if !(p.s_time < p.t_time) {
                    return config("need s_time < t_time");
                }
                nonempty("x_positions", p.x_positions.len())?;
                if p.paths < 2 {
                    return config("paths must be at least 2");
                }
            }
            Scenario::EscapeSweep(p) => {
                positive("amplitude_velocity", p.amplitude_velocity)?;
                positive("horizon_time", p.horizon_time)?;
                if !(p.epsilon > 0.0 && p.epsilon < 1.0) {
                    return config("epsilon must lie in (0, 1)");
                }
                nonempty("prandtl_numbers", p.prandtl_numbers.len())?;
                nonempty("kappa_diffusivities", p.kappa_diffusivities.len())?;
                if p.prandtl_numbers.iter().any(|&v| !(v >= 0.0)) || p.kappa_diffusivities.iter().any(|&v| !(v > 0.0)) {
                    return config("Prandtl numbers must be non-negative and diffusivities positive");
                }
                if p.paths < 2 {
                    return config("paths must be at least 2");
                }
            }
            Scenario::TransportSuite(p) => {
                p.initial.build().map_err(to_config)?;
                positive("horizon_time", p.horizon_time)?;
                nonempty("times", p.times.len())?;
                p.rho0.validate().map_err(to_config)?;
                p.theta0.validate().map_err(to_config)?;
                if !(p.label_window[0] < p.label_window[1]) {
                    return config("label_window must be increasing");
                }
            }
            Scenario::Fluctuation(p) => {
                positive("nu_viscosity", p.nu_viscosity)?;
                positive("variance_cap", p.variance_cap)?;
                positive("rho0.std", p.rho0.std)?;
                positive("rho_final.std", p.rho_final.std)?;
                if !(p.start_time < p.end_time) {
                    return config("need start_time < end_time");
                }
                if matches!(p.source, VelocitySource::HopfCole { .. }) {
                    return config("fluctuation needs a closed-form velocity source");
                }
            }
        }
        Ok(())
    }
}

fn to_config(e: Error) -> Error {
    match e {
        Error::InvalidInput(m) => Error::ConfigInvalid(m),
        other => other,
    }
}

/// Whether a failed check is a violated invariant (exit 2) or a missed tolerance (exit 3).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Invariant,
    Tolerance,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub kind: CheckKind,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `value <= limit`.
    pub fn at_most(name: impl Into<String>, kind: CheckKind, value: f64, limit: f64) -> Self {
        Check { name: name.into(), kind, value, limit, pass: value <= limit }
    }

    pub fn flag(name: impl Into<String>, kind: CheckKind, ok: bool) -> Self {
        Check { name: name.into(), kind, value: if ok { 0.0 } else { 1.0 }, limit: 0.0, pass: ok }
    }
}

/// Exit status of a finished run.
pub fn exit_code(checks: &[Check]) -> i32 {
    if checks.iter().any(|c| !c.pass && c.kind == CheckKind::Invariant) {
        EXIT_ASSERTION
    } else if checks.iter().any(|c| !c.pass) {
        EXIT_TOLERANCE
    } else {
        EXIT_OK
    }
}

/// Exit status for an error that aborted a run.
pub fn error_code(e: &Error) -> i32 {
    match e {
        Error::ConfigInvalid(_) | Error::InvalidInput(_) => EXIT_CONFIG,
        Error::Io(_) => EXIT_IO,
        _ => EXIT_TOLERANCE,
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    spec: &'a ExperimentSpec,
    seed: u64,
    tool: &'static str,
    version: &'static str,
    jobs: Option<usize>,
    wall_seconds: f64,
    finished_unix: u64,
    artifacts: Vec<String>,
    exit_code: i32,
}

/// Runs the scenario in the current thread pool and returns the outcome without writing anything.
pub fn execute(spec: &ExperimentSpec) -> Result<Outcome> {
    spec.validate()?;
    scenarios::execute(spec)
}

/// Runs a spec and writes `<table>.csv`, `summary.json` and `manifest.json`; returns the exit code.
pub fn run(spec: &ExperimentSpec, jobs: Option<usize>) -> Result<i32> {
    let start = Instant::now();
    let outcome = match jobs {
        Some(n) => {
            if n == 0 {
                return config("--jobs must be at least 1");
            }
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| Error::ConfigInvalid(e.to_string()))?;
            pool.install(|| execute(spec))?
        }
        None => execute(spec)?,
    };
    let dir = resolve_output_dir(spec);
    std::fs::create_dir_all(&dir)?;
    let mut artifacts = Vec::new();
    for table in &outcome.tables {
        let name = format!("{}.csv", table.name);
        table.write(std::fs::File::create(dir.join(&name))?)?;
        artifacts.push(name);
    }
    let code = exit_code(&outcome.checks);
    let summary = serde_json::json!({
        "name": spec.name,
        "scenario": spec.scenario.kind(),
        "seed": spec.seed,
        "checks": outcome.checks,
        "report": outcome.report,
    });
    write_json(&dir.join("summary.json"), &summary)?;
    artifacts.push("summary.json".into());
    let manifest = Manifest {
        spec,
        seed: spec.seed,
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        jobs,
        wall_seconds: start.elapsed().as_secs_f64(),
        finished_unix: std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        artifacts,
        exit_code: code,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(code)
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn resolve_output_dir(spec: &ExperimentSpec) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => spec.output_dir.clone(),
    }
}

/// A CSV table held in memory.
#[derive(Clone, Debug, Serialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(&self.header).map_err(crate::backward::csv_err)?;
        for r in &self.rows {
            wr.write_record(r).map_err(crate::backward::csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut v = Vec::new();
        self.write(&mut v)?;
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_round_trips() {
        let cat = catalog();
        assert_eq!(cat.len(), 7);
        for e in cat {
            let spec = ExperimentSpec { name: e.kind.into(), seed: 1, output_dir: "o".into(), scenario: e.example };
            let text = spec.to_toml().unwrap();
            assert_eq!(ExperimentSpec::from_toml(&text).unwrap(), spec, "{text}");
        }
    }

    #[test]
    fn empty_spec_is_config_error() {
        let e = ExperimentSpec::from_toml("").unwrap_err();
        assert_eq!(error_code(&e), EXIT_CONFIG);
    }
}
