//! Declarative parameter sweeps.
//!
//! A [`SweepSpec`] is a JSON document in lab units: couplings and FSR as
//! `value/2π` in MHz, pulse times in ns, lifetimes in µs. `null` in a
//! lifetime or quality-factor grid means "infinite" (channel off).
//!
//! Grid points are expanded in a fixed nesting order (protocol, target,
//! side modes, FSR, qubit levels, sign rule, Q_c, T1, T2φ, g, τ_p), run on a
//! bounded worker pool, and returned in that order.

pub mod convergence;
pub mod recipes;

use std::f64::consts::PI;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    adiabatic_bell_floor, fidelity_error, initial_state, leakage_breakdown,
    stirap_leakage_estimate, LeakageBreakdown, TargetKind, TargetState,
};
use crate::error::{invalid, Result};
use crate::lindblad::{evolve, evolve_subspace, Diagnostics, IntegratorConfig};
use crate::model::{LindbladModel, ModelParams, SignRule};
use crate::pulses::{AngleProfile, ProfileKind, Protocol, PulseSchedule};

pub use convergence::{run_convergence, ConvergenceConfig, ConvergenceReport, ConvergenceRow};
pub use recipes::{figure_recipe, RECIPE_NAMES};

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "LAMBDALINK_WORKERS";
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Largest tolerated |E_full - E_subspace| in a cross-check.
pub const CROSS_CHECK_TOLERANCE: f64 = 1e-8;

const MHZ: f64 = 2.0 * PI * 1e6;

/// How the pulse duration of each grid point is chosen.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Timing {
    /// Use the `tau_ns` axis.
    #[default]
    Grid,
    /// `τ_p = k·π/g`.
    GTau { multiple_of_pi: f64 },
    /// One fixed duration per protocol.
    PerProtocol { stirap_ns: f64, satd_ns: f64 },
}

fn default_protocols() -> Vec<Protocol> {
    vec![Protocol::Stirap, Protocol::Satd]
}
fn default_targets() -> Vec<TargetKind> {
    vec![TargetKind::Transfer]
}
fn infinite() -> Vec<Option<f64>> {
    vec![None]
}
fn default_fsr() -> Vec<f64> {
    vec![100.0]
}
fn default_side_modes() -> Vec<usize> {
    vec![2]
}
fn default_levels() -> Vec<usize> {
    vec![2]
}
fn default_sign_rules() -> Vec<SignRule> {
    vec![SignRule::Alternating]
}
fn default_center() -> f64 {
    5.0
}
fn default_anharmonicity() -> f64 {
    -300.0
}
fn default_mode_levels() -> usize {
    2
}
fn default_tol() -> f64 {
    1e-8
}
fn default_true() -> bool {
    true
}
fn default_cross_check() -> usize {
    20
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_protocols")]
    pub protocols: Vec<Protocol>,
    #[serde(default = "default_targets")]
    pub targets: Vec<TargetKind>,
    /// Overrides the per-protocol default (linear STIRAP, quintic SATD).
    #[serde(default)]
    pub profile: Option<ProfileKind>,
    pub g_mhz: Vec<f64>,
    #[serde(default)]
    pub tau_ns: Vec<f64>,
    #[serde(default)]
    pub timing: Timing,
    #[serde(default = "infinite")]
    pub q_c: Vec<Option<f64>>,
    #[serde(default = "infinite")]
    pub t1_us: Vec<Option<f64>>,
    #[serde(default = "infinite")]
    pub t2phi_us: Vec<Option<f64>>,
    #[serde(default = "default_fsr")]
    pub fsr_mhz: Vec<f64>,
    #[serde(default = "default_side_modes")]
    pub side_modes: Vec<usize>,
    #[serde(default = "default_levels")]
    pub qubit_levels: Vec<usize>,
    #[serde(default = "default_sign_rules")]
    pub sign_rule: Vec<SignRule>,
    #[serde(default = "default_mode_levels")]
    pub mode_levels: usize,
    #[serde(default = "default_center")]
    pub center_ghz: f64,
    #[serde(default = "default_anharmonicity")]
    pub anharmonicity_mhz: f64,
    #[serde(default)]
    pub detuning_a_mhz: f64,
    #[serde(default)]
    pub detuning_b_mhz: f64,
    /// Absolute and relative integrator tolerance.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub max_step_ns: Option<f64>,
    /// Accepted plus rejected step budget per run.
    #[serde(default)]
    pub max_steps: Option<usize>,
    /// Integrate in the zero/one-excitation subspace.
    #[serde(default = "default_true")]
    pub subspace: bool,
    /// One randomly chosen point per block of this many is re-run on the
    /// full space; 0 disables.
    #[serde(default = "default_cross_check")]
    pub cross_check_every: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    /// Output path; `.csv` and `.json` are written next to each other.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl SweepSpec {
    /// Minimal spec over the given couplings with every other field at its
    /// default.
    pub fn new(g_mhz: Vec<f64>) -> Self {
        serde_json::from_value(serde_json::json!({ "g_mhz": g_mhz })).expect("defaults deserialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SweepSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn integrator(&self) -> IntegratorConfig {
        let base = IntegratorConfig::with_tolerance(self.tol);
        IntegratorConfig {
            max_step: self.max_step_ns.map(|h| h * 1e-9),
            max_steps: self.max_steps.unwrap_or(base.max_steps),
            ..base
        }
    }

    pub fn validate(&self) -> Result<()> {
        let axes = [
            ("protocols", self.protocols.len()),
            ("targets", self.targets.len()),
            ("g_mhz", self.g_mhz.len()),
            ("q_c", self.q_c.len()),
            ("t1_us", self.t1_us.len()),
            ("t2phi_us", self.t2phi_us.len()),
            ("fsr_mhz", self.fsr_mhz.len()),
            ("side_modes", self.side_modes.len()),
            ("qubit_levels", self.qubit_levels.len()),
            ("sign_rule", self.sign_rule.len()),
        ];
        for (name, len) in axes {
            if len == 0 {
                return Err(invalid(format!("grid axis `{name}` is empty")));
            }
        }
        match &self.timing {
            Timing::Grid if self.tau_ns.is_empty() => {
                return Err(invalid("timing rule `grid` needs a non-empty `tau_ns`"));
            }
            Timing::GTau { multiple_of_pi } if !(*multiple_of_pi > 0.0) => {
                return Err(invalid("g_tau multiple must be positive"));
            }
            Timing::PerProtocol { stirap_ns, satd_ns } if !(*stirap_ns > 0.0 && *satd_ns > 0.0) => {
                return Err(invalid("per-protocol durations must be positive"));
            }
            _ => {}
        }
        if !(self.tol > 0.0) {
            return Err(invalid("tol must be positive"));
        }
        if self.workers == Some(0) {
            return Err(invalid("workers must be at least 1"));
        }
        for p in self.points()? {
            p.params()?.validate()?;
            p.schedule()?;
        }
        Ok(())
    }

    fn durations(&self, protocol: Protocol, g_mhz: f64) -> Vec<f64> {
        match &self.timing {
            Timing::Grid => self.tau_ns.clone(),
            Timing::GTau { multiple_of_pi } => vec![multiple_of_pi * PI / (g_mhz * MHZ) * 1e9],
            Timing::PerProtocol { stirap_ns, satd_ns } => vec![match protocol {
                Protocol::Stirap => *stirap_ns,
                Protocol::Satd => *satd_ns,
            }],
        }
    }

    /// Every grid point in sweep order.
    pub fn points(&self) -> Result<Vec<GridPoint>> {
        let mut out = Vec::new();
        for &protocol in &self.protocols {
            for &target in &self.targets {
                for &side_modes in &self.side_modes {
                    for &fsr_mhz in &self.fsr_mhz {
                        for &qubit_levels in &self.qubit_levels {
                            for &sign_rule in &self.sign_rule {
                                for &q_c in &self.q_c {
                                    for &t1 in &self.t1_us {
                                        for &t2 in &self.t2phi_us {
                                            for &g_mhz in &self.g_mhz {
                                                for tau_ns in self.durations(protocol, g_mhz) {
                                                    out.push(GridPoint {
                                                        protocol,
                                                        target,
                                                        profile: self
                                                            .profile
                                                            .unwrap_or(protocol.default_profile()),
                                                        g_mhz,
                                                        tau_ns,
                                                        fsr_mhz,
                                                        side_modes,
                                                        qubit_levels,
                                                        mode_levels: self.mode_levels,
                                                        sign_rule,
                                                        q_c: q_c.unwrap_or(f64::INFINITY),
                                                        t1_us: t1.unwrap_or(f64::INFINITY),
                                                        t2phi_us: t2.unwrap_or(f64::INFINITY),
                                                        center_ghz: self.center_ghz,
                                                        anharmonicity_mhz: self.anharmonicity_mhz,
                                                        detuning_a_mhz: self.detuning_a_mhz,
                                                        detuning_b_mhz: self.detuning_b_mhz,
                                                    });
                                                }
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        if out.is_empty() {
            return Err(invalid("sweep grid is empty"));
        }
        Ok(out)
    }
}

/// One fully resolved simulation in lab units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub protocol: Protocol,
    pub target: TargetKind,
    pub profile: ProfileKind,
    pub g_mhz: f64,
    pub tau_ns: f64,
    pub fsr_mhz: f64,
    pub side_modes: usize,
    pub qubit_levels: usize,
    pub mode_levels: usize,
    pub sign_rule: SignRule,
    pub q_c: f64,
    pub t1_us: f64,
    pub t2phi_us: f64,
    pub center_ghz: f64,
    pub anharmonicity_mhz: f64,
    pub detuning_a_mhz: f64,
    pub detuning_b_mhz: f64,
}

impl GridPoint {
    /// Coherent five-mode point with default fixed parameters.
    pub fn new(protocol: Protocol, target: TargetKind, g_mhz: f64, tau_ns: f64) -> Self {
        Self {
            protocol,
            target,
            profile: protocol.default_profile(),
            g_mhz,
            tau_ns,
            fsr_mhz: 100.0,
            side_modes: 2,
            qubit_levels: 2,
            mode_levels: 2,
            sign_rule: SignRule::Alternating,
            q_c: f64::INFINITY,
            t1_us: f64::INFINITY,
            t2phi_us: f64::INFINITY,
            center_ghz: 5.0,
            anharmonicity_mhz: -300.0,
            detuning_a_mhz: 0.0,
            detuning_b_mhz: 0.0,
        }
    }

    pub fn params(&self) -> Result<ModelParams> {
        let p = ModelParams {
            center_frequency: 2.0 * PI * self.center_ghz * 1e9,
            fsr: self.fsr_mhz * MHZ,
            side_modes: self.side_modes,
            detuning_a: self.detuning_a_mhz * MHZ,
            detuning_b: self.detuning_b_mhz * MHZ,
            anharmonicity_a: self.anharmonicity_mhz * MHZ,
            anharmonicity_b: self.anharmonicity_mhz * MHZ,
            peak_coupling: self.g_mhz * MHZ,
            t1_a: self.t1_us * 1e-6,
            t1_b: self.t1_us * 1e-6,
            t2phi_a: self.t2phi_us * 1e-6,
            t2phi_b: self.t2phi_us * 1e-6,
            quality_factor: self.q_c,
            sign_rule: self.sign_rule,
            qubit_levels: self.qubit_levels,
            mode_levels: self.mode_levels,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn schedule(&self) -> Result<PulseSchedule> {
        let profile = AngleProfile::new(self.profile, self.target.theta_p(), self.tau_ns * 1e-9)?;
        PulseSchedule::new(self.protocol, profile, self.g_mhz * MHZ)
    }

    /// Leading-order STIRAP error prediction; `None` for SATD.
    pub fn magnus_estimate(&self) -> Result<Option<f64>> {
        if self.protocol != Protocol::Stirap || self.g_mhz <= 0.0 {
            return Ok(None);
        }
        let sched = self.schedule()?;
        Ok(Some(
            stirap_leakage_estimate(&sched.profile, self.g_mhz * MHZ)?.predicted_error(),
        ))
    }

    /// Pseudo-dark floor for Bell targets with adjacent modes.
    pub fn bell_floor(&self) -> Option<f64> {
        if self.target != TargetKind::Bell
            || self.side_modes == 0
            || self.sign_rule != SignRule::Alternating
        {
            return None;
        }
        adiabatic_bell_floor(self.g_mhz * MHZ, self.fsr_mhz * MHZ).ok()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Full,
    Subspace,
}

#[derive(Clone, Debug)]
pub struct PointResult {
    pub error: f64,
    pub leakage: LeakageBreakdown,
    pub diagnostics: Diagnostics,
}

/// Runs one grid point from `|1_a⟩`.
pub fn simulate_point(
    point: &GridPoint,
    config: &IntegratorConfig,
    engine: Engine,
) -> Result<PointResult> {
    let params = point.params()?;
    let model = LindbladModel::build(&params)?;
    let schedule = point.schedule()?;
    let rho0 = initial_state(&model.space)?;
    let res = match engine {
        Engine::Full => evolve(&rho0, &model, &schedule, config, None)?,
        Engine::Subspace => evolve_subspace(&rho0, &model, &schedule, config, None)?,
    };
    let target = TargetState::new(point.target, &model.space)?;
    Ok(PointResult {
        error: fidelity_error(&res.final_state, &target)?,
        leakage: leakage_breakdown(&res.final_state)?,
        diagnostics: res.diagnostics,
    })
}

/// One row of a sweep table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub index: usize,
    pub protocol: Protocol,
    pub target: TargetKind,
    pub profile: ProfileKind,
    pub theta_p: f64,
    pub g_mhz: f64,
    pub tau_ns: f64,
    pub fsr_mhz: f64,
    pub side_modes: usize,
    pub qubit_levels: usize,
    pub mode_levels: usize,
    pub sign_rule: SignRule,
    pub q_c: f64,
    pub t1_us: f64,
    pub t2phi_us: f64,
    pub center_ghz: f64,
    pub anharmonicity_mhz: f64,
    pub detuning_a_mhz: f64,
    pub detuning_b_mhz: f64,
    pub tol: f64,
    pub max_step_ns: Option<f64>,
    pub engine: Engine,
    pub error: Option<f64>,
    pub leakage: String,
    pub magnus_estimate: Option<f64>,
    pub bell_floor: Option<f64>,
    pub cross_check_delta: Option<f64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evaluations: usize,
    pub wall_time_s: f64,
    pub status: String,
    pub timestamp: String,
    pub engine_version: String,
}

impl RunRecord {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn point(&self) -> GridPoint {
        GridPoint {
            protocol: self.protocol,
            target: self.target,
            profile: self.profile,
            g_mhz: self.g_mhz,
            tau_ns: self.tau_ns,
            fsr_mhz: self.fsr_mhz,
            side_modes: self.side_modes,
            qubit_levels: self.qubit_levels,
            mode_levels: self.mode_levels,
            sign_rule: self.sign_rule,
            q_c: self.q_c,
            t1_us: self.t1_us,
            t2phi_us: self.t2phi_us,
            center_ghz: self.center_ghz,
            anharmonicity_mhz: self.anharmonicity_mhz,
            detuning_a_mhz: self.detuning_a_mhz,
            detuning_b_mhz: self.detuning_b_mhz,
        }
    }

    /// Re-runs the stored parameters with the stored integrator settings.
    pub fn rerun(&self) -> Result<f64> {
        let config = IntegratorConfig {
            max_step: self.max_step_ns.map(|h| h * 1e-9),
            ..IntegratorConfig::with_tolerance(self.tol)
        };
        Ok(simulate_point(&self.point(), &config, self.engine)?.error)
    }
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn run_point(index: usize, point: &GridPoint, spec: &SweepSpec, cross_check: bool) -> RunRecord {
    let config = spec.integrator();
    let engine = if spec.subspace {
        Engine::Subspace
    } else {
        Engine::Full
    };
    let mut rec = RunRecord {
        index,
        protocol: point.protocol,
        target: point.target,
        profile: point.profile,
        theta_p: point.target.theta_p(),
        g_mhz: point.g_mhz,
        tau_ns: point.tau_ns,
        fsr_mhz: point.fsr_mhz,
        side_modes: point.side_modes,
        qubit_levels: point.qubit_levels,
        mode_levels: point.mode_levels,
        sign_rule: point.sign_rule,
        q_c: point.q_c,
        t1_us: point.t1_us,
        t2phi_us: point.t2phi_us,
        center_ghz: point.center_ghz,
        anharmonicity_mhz: point.anharmonicity_mhz,
        detuning_a_mhz: point.detuning_a_mhz,
        detuning_b_mhz: point.detuning_b_mhz,
        tol: spec.tol,
        max_step_ns: spec.max_step_ns,
        engine,
        error: None,
        leakage: String::new(),
        magnus_estimate: point.magnus_estimate().ok().flatten(),
        bell_floor: point.bell_floor(),
        cross_check_delta: None,
        accepted_steps: 0,
        rejected_steps: 0,
        rhs_evaluations: 0,
        wall_time_s: 0.0,
        status: "ok".into(),
        timestamp: timestamp(),
        engine_version: ENGINE_VERSION.into(),
    };
    match simulate_point(point, &config, engine) {
        Ok(r) => {
            rec.error = Some(r.error);
            rec.leakage = r.leakage.encode();
            rec.accepted_steps = r.diagnostics.accepted_steps;
            rec.rejected_steps = r.diagnostics.rejected_steps;
            rec.rhs_evaluations = r.diagnostics.rhs_evaluations;
            rec.wall_time_s = r.diagnostics.wall_time_s;
            if cross_check && engine == Engine::Subspace {
                match simulate_point(point, &config, Engine::Full) {
                    Ok(full) => {
                        let delta = (full.error - r.error).abs();
                        rec.cross_check_delta = Some(delta);
                        if !(delta <= CROSS_CHECK_TOLERANCE) {
                            rec.status =
                                format!("failed: full-space cross-check differs by {delta:.3e}");
                        }
                    }
                    Err(e) => rec.status = format!("failed: full-space cross-check: {e}"),
                }
            }
        }
        Err(e) => rec.status = format!("failed: {e}"),
    }
    rec
}

/// Indices re-run on the full space: one random pick per block.
fn cross_check_indices(n: usize, every: usize, seed: u64) -> Vec<bool> {
    let mut picks = vec![false; n];
    if every == 0 {
        return picks;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for start in (0..n).step_by(every) {
        let len = every.min(n - start);
        picks[start + rng.random_range(0..len)] = true;
    }
    picks
}

/// Worker count: environment override, then the spec, then all cores.
pub fn worker_count(spec: &SweepSpec) -> Result<usize> {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| invalid(format!("{WORKERS_ENV}={v} is not a count")))?;
        if n == 0 {
            return Err(invalid(format!("{WORKERS_ENV} must be at least 1")));
        }
        return Ok(n);
    }
    Ok(spec
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())))
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub spec: SweepSpec,
    pub records: Vec<RunRecord>,
}

impl SweepOutcome {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| !r.ok()).count()
    }

    /// Record with the smallest error, if any point succeeded.
    pub fn best(&self) -> Option<&RunRecord> {
        self.records
            .iter()
            .filter(|r| r.error.is_some())
            .min_by(|a, b| a.error.unwrap().total_cmp(&b.error.unwrap()))
    }
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutcome> {
    run_sweep_with_workers(spec, worker_count(spec)?)
}

/// Runs a sweep on exactly `workers` threads.
pub fn run_sweep_with_workers(spec: &SweepSpec, workers: usize) -> Result<SweepOutcome> {
    if workers == 0 {
        return Err(invalid("workers must be at least 1"));
    }
    spec.validate()?;
    let points = spec.points()?;
    let checks = cross_check_indices(points.len(), spec.cross_check_every, spec.seed);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
    let records = pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(i, p)| run_point(i, p, spec, checks[i]))
            .collect::<Vec<_>>()
    });
    Ok(SweepOutcome {
        spec: spec.clone(),
        records,
    })
}

pub fn write_records_csv<W: std::io::Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv(path: &Path) -> Result<Vec<RunRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.deserialize().map(|r| r.map_err(Into::into)).collect()
}

#[derive(Serialize)]
struct Sidecar<'a> {
    spec: &'a SweepSpec,
    engine_version: &'a str,
    points: usize,
    failures: usize,
    table: String,
    written: String,
}

/// Writes `<stem>.csv` and `<stem>.json` and returns both paths.
pub fn write_outputs(outcome: &SweepOutcome, path: &Path) -> Result<(PathBuf, PathBuf)> {
    let csv_path = path.with_extension("csv");
    let json_path = path.with_extension("json");
    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_records_csv(&outcome.records, BufWriter::new(File::create(&csv_path)?))?;
    let sidecar = Sidecar {
        spec: &outcome.spec,
        engine_version: ENGINE_VERSION,
        points: outcome.records.len(),
        failures: outcome.failures(),
        table: csv_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        written: timestamp(),
    };
    serde_json::to_writer_pretty(BufWriter::new(File::create(&json_path)?), &sidecar)?;
    Ok((csv_path, json_path))
}
