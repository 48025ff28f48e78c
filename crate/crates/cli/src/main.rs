use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use lambdalink::analysis::{initial_state, TargetKind};
use lambdalink::lindblad::{evolve, evolve_subspace, IntegratorConfig};
use lambdalink::model::{LindbladModel, SignRule};
use lambdalink::pulses::{emit_waveform, write_waveform_csv, ProfileKind, Protocol};
use lambdalink::sweeps::{
    figure_recipe, run_convergence, run_sweep_with_workers, worker_count, write_outputs,
    ConvergenceConfig, GridPoint, SweepOutcome, SweepSpec, Timing, RECIPE_NAMES, WORKERS_ENV,
};

/// Lindblad simulation of STIRAP and SATD over a multimode interconnect.
#[derive(Parser)]
#[command(name = "lambdalink", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one pulse and print its run record as JSON.
    Simulate(SimulateArgs),
    /// Run a parameter grid from a JSON config.
    Sweep(SweepArgs),
    /// Mode-count and qubit-level convergence report.
    Convergence(ConvergenceArgs),
    /// Emit the coupling waveforms of one pulse as CSV.
    Pulses(PulseArgs),
    /// Run a pinned figure recipe.
    Figures(FigureArgs),
}

#[derive(Args)]
struct RunOpts {
    /// Integrator absolute and relative tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Worker threads.
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
    /// Output stem; `.csv` and `.json` are written.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PulseShape {
    #[arg(long, default_value = "satd")]
    protocol: Protocol,
    #[arg(long, default_value = "transfer")]
    target: TargetKind,
    /// Peak coupling g/2π in MHz.
    #[arg(long, default_value_t = 15.0)]
    g_mhz: f64,
    /// Pulse duration in ns; defaults to gτ = 4π.
    #[arg(long)]
    tau_ns: Option<f64>,
    /// Angle profile; defaults to linear for STIRAP and quintic for SATD.
    #[arg(long)]
    profile: Option<ProfileKind>,
}

impl PulseShape {
    fn point(&self) -> GridPoint {
        let tau = self.tau_ns.unwrap_or(2.0 / self.g_mhz * 1e3);
        let mut p = GridPoint::new(self.protocol, self.target, self.g_mhz, tau);
        if let Some(k) = self.profile {
            p.profile = k;
        }
        p
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    shape: PulseShape,
    /// Free spectral range Δ_c/2π in MHz.
    #[arg(long, default_value_t = 100.0)]
    fsr_mhz: f64,
    /// Interconnect modes on each side of the center mode.
    #[arg(long, default_value_t = 2)]
    side_modes: usize,
    #[arg(long, default_value_t = 2)]
    qubit_levels: usize,
    #[arg(long, default_value = "alternating")]
    sign_rule: SignRule,
    /// Interconnect quality factor; omitted means lossless.
    #[arg(long)]
    q_c: Option<f64>,
    /// Qubit relaxation time in µs; omitted means none.
    #[arg(long)]
    t1_us: Option<f64>,
    /// Qubit pure-dephasing time in µs; omitted means none.
    #[arg(long)]
    t2phi_us: Option<f64>,
    /// Integrate on the full Hilbert space instead of the one-excitation subspace.
    #[arg(long)]
    full: bool,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Also write populations at evenly spaced times to this CSV.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Number of trajectory samples.
    #[arg(long, default_value_t = 201)]
    samples: usize,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON sweep config.
    config: PathBuf,
    #[command(flatten)]
    run: RunOpts,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    run: RunOpts,
}

#[derive(Args)]
struct PulseArgs {
    #[command(flatten)]
    shape: PulseShape,
    /// Samples per ns.
    #[arg(long, default_value_t = 1.0)]
    samples_per_ns: f64,
    /// Output CSV; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FigureArgs {
    /// Recipe name, or `list`.
    name: String,
    #[command(flatten)]
    run: RunOpts,
    /// Print the recipe's sweep config instead of running it.
    #[arg(long)]
    print_spec: bool,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Returns `false` when any simulated point failed.
fn dispatch(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => {
            let spec = SweepSpec::load(&a.config)
                .with_context(|| format!("reading {}", a.config.display()))?;
            sweep(spec, &a.run, "sweep")
        }
        Command::Convergence(a) => convergence(&a.run),
        Command::Pulses(a) => pulses(a),
        Command::Figures(a) => figures(a),
    }
}

fn simulate(a: SimulateArgs) -> Result<bool> {
    let mut point = a.shape.point();
    point.fsr_mhz = a.fsr_mhz;
    point.side_modes = a.side_modes;
    point.qubit_levels = a.qubit_levels;
    point.sign_rule = a.sign_rule;
    point.q_c = a.q_c.unwrap_or(f64::INFINITY);
    point.t1_us = a.t1_us.unwrap_or(f64::INFINITY);
    point.t2phi_us = a.t2phi_us.unwrap_or(f64::INFINITY);

    let mut spec = single_point_spec(&point);
    spec.tol = a.tol;
    spec.subspace = !a.full;
    let outcome = run_sweep_with_workers(&spec, 1)?;
    let record = &outcome.records[0];
    println!("{}", serde_json::to_string_pretty(record)?);

    if let Some(path) = &a.trajectory {
        if a.samples < 2 {
            bail!("--samples must be at least 2");
        }
        let model = LindbladModel::build(&point.params()?)?;
        let schedule = point.schedule()?;
        let rho0 = initial_state(&model.space)?;
        let tau = schedule.duration();
        let times: Vec<f64> = (0..a.samples)
            .map(|k| tau * k as f64 / (a.samples - 1) as f64)
            .collect();
        let config = IntegratorConfig::with_tolerance(a.tol);
        let res = if a.full {
            evolve(&rho0, &model, &schedule, &config, Some(&times))?
        } else {
            evolve_subspace(&rho0, &model, &schedule, &config, Some(&times))?
        };
        let traj = res.sampled.context("no trajectory returned")?;
        traj.write_csv(BufWriter::new(create(path)?))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(record.ok())
}

/// A spec whose grid is exactly `point`.
fn single_point_spec(p: &GridPoint) -> SweepSpec {
    let finite = |v: f64| if v.is_finite() { Some(v) } else { None };
    let mut s = SweepSpec::new(vec![p.g_mhz]);
    s.name = "simulate".into();
    s.protocols = vec![p.protocol];
    s.targets = vec![p.target];
    s.profile = Some(p.profile);
    s.tau_ns = vec![p.tau_ns];
    s.timing = Timing::Grid;
    s.fsr_mhz = vec![p.fsr_mhz];
    s.side_modes = vec![p.side_modes];
    s.qubit_levels = vec![p.qubit_levels];
    s.sign_rule = vec![p.sign_rule];
    s.q_c = vec![finite(p.q_c)];
    s.t1_us = vec![finite(p.t1_us)];
    s.t2phi_us = vec![finite(p.t2phi_us)];
    s.cross_check_every = 0;
    s
}

fn sweep(mut spec: SweepSpec, opts: &RunOpts, fallback: &str) -> Result<bool> {
    if let Some(tol) = opts.tol {
        spec.tol = tol;
    }
    let workers = match opts.workers {
        Some(n) => n,
        None => worker_count(&spec)?,
    };
    let stem = opts
        .output
        .clone()
        .or_else(|| spec.output.clone())
        .unwrap_or_else(|| {
            PathBuf::from(if spec.name.is_empty() {
                fallback.to_string()
            } else {
                spec.name.clone()
            })
        });
    spec.validate()?;
    let n = spec.points()?.len();
    eprintln!("running {n} points on {workers} workers");
    let outcome = run_sweep_with_workers(&spec, workers)?;
    let (csv, json) = write_outputs(&outcome, &stem)?;
    summarize(&outcome);
    eprintln!("wrote {} and {}", csv.display(), json.display());
    Ok(outcome.failures() == 0)
}

fn summarize(outcome: &SweepOutcome) {
    let failures = outcome.failures();
    eprintln!("{} points, {failures} failed", outcome.records.len());
    for r in outcome.records.iter().filter(|r| !r.ok()).take(10) {
        eprintln!("  point {}: {}", r.index, r.status);
    }
    if let Some(b) = outcome.best() {
        eprintln!(
            "best E = {:.4e} ({} {}, g/2π = {} MHz, τ_p = {} ns)",
            b.error.unwrap_or(f64::NAN),
            b.protocol.as_str(),
            b.target.as_str(),
            b.g_mhz,
            b.tau_ns
        );
    }
}

fn convergence(opts: &RunOpts) -> Result<bool> {
    let mut cfg = ConvergenceConfig {
        workers: opts.workers,
        ..Default::default()
    };
    if let Some(tol) = opts.tol {
        cfg.tol = tol;
    }
    let report = run_convergence(&cfg)?;
    let stem = opts
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from("convergence"));
    let csv = stem.with_extension("csv");
    report.write_csv(BufWriter::new(create(&csv)?))?;
    println!("three_vs_five_modes_rel {:.4}", report.three_vs_five);
    println!("one_vs_five_modes_rel {:.4}", report.one_vs_five);
    println!("two_vs_three_levels_abs {:.3e}", report.two_vs_three_levels);
    eprintln!("wrote {}", csv.display());
    Ok(true)
}

fn pulses(a: PulseArgs) -> Result<bool> {
    if a.samples_per_ns.is_nan() || a.samples_per_ns <= 0.0 {
        bail!("--samples-per-ns must be positive");
    }
    let schedule = a.shape.point().schedule()?;
    let rows = emit_waveform(&schedule, a.samples_per_ns * 1e9)?;
    match &a.output {
        Some(path) => write_waveform_csv(&rows, BufWriter::new(create(path)?))?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_waveform_csv(&rows, &mut lock)?;
            lock.flush()?;
        }
    }
    Ok(true)
}

fn figures(a: FigureArgs) -> Result<bool> {
    if a.name == "list" {
        let mut out = std::io::stdout().lock();
        for n in RECIPE_NAMES {
            if writeln!(out, "{n}").is_err() {
                break;
            }
        }
        return Ok(true);
    }
    let spec = figure_recipe(&a.name)
        .with_context(|| format!("known recipes: {}", RECIPE_NAMES.join(", ")))?;
    if a.print_spec {
        println!("{}", serde_json::to_string_pretty(&spec)?);
        return Ok(true);
    }
    sweep(spec, &a.run, &a.name)
}

fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    File::create(path).with_context(|| format!("creating {}", path.display()))
}
