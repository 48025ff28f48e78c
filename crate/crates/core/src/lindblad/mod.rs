//! Time integration of the Lindblad master equation.
//!
//! The density matrix is integrated directly as a flat column-major complex
//! vector with the DOP853 stepper in [`dop853`]. The right-hand side is
//! written as
//!
//! `dρ/dt = -i(H_eff ρ - ρ H_eff†) + Σ_k L_k ρ L_k†`
//!
//! with `H_eff = H - (i/2) Σ_k L_k† L_k` and `L_k = sqrt(rate_k)·C_k`. All
//! operators are stored row-compressed since every one of them has only a
//! handful of entries per row.

pub mod dop853;

use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hilbert::{
    hermiticity_error, CompositeSpace, DensityMatrix, OperatorMatrix, StateTolerances, C64,
};
use crate::model::{single_excitation_basis, LindbladModel};
use crate::pulses::PulseSchedule;

use dop853::{Dop853Options, ErrorNorm, Event};

const I: C64 = C64::new(0.0, 1.0);

/// Trace drift tolerated along a trajectory.
pub const TRACE_TOLERANCE: f64 = 1e-8;
/// Hermiticity drift tolerated along a trajectory.
pub const HERMITICITY_TOLERANCE: f64 = 1e-9;
/// Most negative eigenvalue accepted in the final state at tolerances of
/// 1e-10 and tighter; looser runs scale it, see
/// [`IntegratorConfig::positivity_tolerance`].
pub const POSITIVITY_TOLERANCE: f64 = -1e-7;
/// Violations beyond this multiple of the tolerances abort a run.
pub const ABORT_FACTOR: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Largest step in seconds; `None` uses a fiftieth of the pulse duration.
    pub max_step: Option<f64>,
    pub max_steps: usize,
    /// Checks trace and hermiticity after each accepted step.
    pub check_invariants: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_step: None,
            max_steps: 2_000_000,
            check_invariants: true,
        }
    }
}

impl IntegratorConfig {
    /// Same absolute and relative tolerance.
    pub fn with_tolerance(tol: f64) -> Self {
        Self {
            abs_tol: tol,
            rel_tol: tol,
            ..Self::default()
        }
    }

    /// Final-state eigenvalue floor: global error grows to a few hundred
    /// local tolerances over a run, so the floor widens with loose tolerances.
    pub fn positivity_tolerance(&self) -> f64 {
        POSITIVITY_TOLERANCE.min(-1e3 * self.abs_tol.max(self.rel_tol))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(invalid("integrator tolerances must be positive"));
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0) {
                return Err(invalid("max_step must be positive"));
            }
        }
        Ok(())
    }

    fn options(&self, duration: f64) -> Dop853Options {
        Dop853Options {
            rtol: self.rel_tol,
            atol: self.abs_tol,
            max_step: self.max_step.unwrap_or(duration / 50.0),
            max_steps: self.max_steps,
            // zero-padded full-space runs must step exactly like subspace runs
            norm: ErrorNorm::Max,
            ..Dop853Options::default()
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evaluations: usize,
    pub wall_time_s: f64,
    /// Largest trace drift seen at an accepted step.
    pub max_trace_drift: f64,
    pub max_hermiticity_error: f64,
}

/// Observables recorded at the requested sample times: mean occupation of
/// every subsystem followed by the trace.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub columns: Vec<String>,
    pub rows: Vec<(f64, Vec<f64>)>,
}

impl Trajectory {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "t_ns")?;
        for c in &self.columns {
            write!(out, ",{c}")?;
        }
        writeln!(out)?;
        for (t, vals) in &self.rows {
            write!(out, "{}", t * 1e9)?;
            for v in vals {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct EvolutionResult {
    pub final_state: DensityMatrix,
    pub sampled: Option<Trajectory>,
    pub diagnostics: Diagnostics,
}

/// Row-compressed complex matrix.
#[derive(Clone, Debug, Default)]
struct SparseRows {
    ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseRows {
    fn from_dense(m: &DMatrix<C64>) -> Self {
        let mut out = SparseRows {
            ptr: vec![0],
            ..Default::default()
        };
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != C64::new(0.0, 0.0) {
                    out.cols.push(j);
                    out.vals.push(v);
                }
            }
            out.ptr.push(out.cols.len());
        }
        out
    }

    #[inline]
    fn row(&self, i: usize) -> std::ops::Range<usize> {
        self.ptr[i]..self.ptr[i + 1]
    }
}

/// Precompiled Lindblad generator for `H = H_0 + g_ac H_a + g_bc H_b`.
#[derive(Clone, Debug)]
pub struct LindbladRhs {
    dim: usize,
    /// Union sparsity pattern of `H_eff`, values refreshed per call.
    pattern: SparseRows,
    v_static: Vec<C64>,
    v_a: Vec<C64>,
    v_b: Vec<C64>,
    jumps: Vec<SparseRows>,
    scratch: Vec<C64>,
}

impl LindbladRhs {
    pub fn new(model: &LindbladModel) -> Self {
        let diss: Vec<(f64, &DMatrix<C64>)> = model
            .dissipators
            .iter()
            .map(|d| (d.rate, d.collapse.matrix()))
            .collect();
        Self::from_dense(
            model.static_h.matrix(),
            model.coupling_a.matrix(),
            model.coupling_b.matrix(),
            &diss,
        )
    }

    fn from_dense(
        static_h: &DMatrix<C64>,
        h_a: &DMatrix<C64>,
        h_b: &DMatrix<C64>,
        dissipators: &[(f64, &DMatrix<C64>)],
    ) -> Self {
        let dim = static_h.nrows();
        let mut h0 = static_h.clone();
        let mut jumps = Vec::with_capacity(dissipators.len());
        for &(rate, c) in dissipators {
            h0 -= (c.adjoint() * c) * C64::new(0.0, 0.5 * rate);
            jumps.push(SparseRows::from_dense(&(c * C64::new(rate.sqrt(), 0.0))));
        }
        let mut mask = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
        for m in [&h0, h_a, h_b] {
            for (dst, src) in mask.iter_mut().zip(m.iter()) {
                if *src != C64::new(0.0, 0.0) {
                    *dst = C64::new(1.0, 0.0);
                }
            }
        }
        let pattern = SparseRows::from_dense(&mask);
        let gather = |m: &DMatrix<C64>| -> Vec<C64> {
            (0..dim)
                .flat_map(|i| pattern.row(i).map(move |p| (i, p)))
                .map(|(i, p)| m[(i, pattern.cols[p])])
                .collect()
        };
        let (v_static, v_a, v_b) = (gather(&h0), gather(h_a), gather(h_b));
        Self {
            dim,
            pattern,
            v_static,
            v_a,
            v_b,
            jumps,
            scratch: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    /// Writes `dρ/dt` for column-major `rho` into `out`.
    pub fn apply(&mut self, g_ac: f64, g_bc: f64, rho: &[C64], out: &mut [C64]) {
        let d = self.dim;
        debug_assert_eq!(rho.len(), d * d);
        debug_assert_eq!(out.len(), d * d);
        for (p, v) in self.pattern.vals.iter_mut().enumerate() {
            *v = self.v_static[p] + self.v_a[p] * g_ac + self.v_b[p] * g_bc;
        }
        let h = &self.pattern;

        for j in 0..d {
            let col = &rho[j * d..(j + 1) * d];
            let out_col = &mut out[j * d..(j + 1) * d];
            // -i H ρ
            for (i, o) in out_col.iter_mut().enumerate() {
                let mut s = C64::new(0.0, 0.0);
                for p in h.row(i) {
                    s += h.vals[p] * col[h.cols[p]];
                }
                *o = -I * s;
            }
            // +i ρ H†
            for p in h.row(j) {
                let c = I * h.vals[p].conj();
                let src = &rho[h.cols[p] * d..(h.cols[p] + 1) * d];
                for (o, r) in out_col.iter_mut().zip(src) {
                    *o += c * r;
                }
            }
        }

        for l in &self.jumps {
            // scratch = ρ L†, column by column
            for j in 0..d {
                let t_col = &mut self.scratch[j * d..(j + 1) * d];
                t_col.fill(C64::new(0.0, 0.0));
                for p in l.row(j) {
                    let c = l.vals[p].conj();
                    let src = &rho[l.cols[p] * d..(l.cols[p] + 1) * d];
                    for (t, r) in t_col.iter_mut().zip(src) {
                        *t += c * r;
                    }
                }
            }
            // out += L scratch
            for j in 0..d {
                let t_col = &self.scratch[j * d..(j + 1) * d];
                let out_col = &mut out[j * d..(j + 1) * d];
                for (i, o) in out_col.iter_mut().enumerate() {
                    for p in l.row(i) {
                        *o += l.vals[p] * t_col[l.cols[p]];
                    }
                }
            }
        }
    }
}

/// Couplings at `t`, clamped onto the schedule's interval.
fn controls_at(schedule: &PulseSchedule, t: f64) -> (f64, f64) {
    schedule
        .controls(t.clamp(0.0, schedule.duration()))
        .expect("clamped time lies inside the pulse")
}

/// Dense reference evaluation of the master equation at time `t`.
pub fn lindblad_rhs(
    t: f64,
    rho: &DensityMatrix,
    model: &LindbladModel,
    schedule: &PulseSchedule,
) -> Result<OperatorMatrix> {
    if rho.space() != &model.space {
        return Err(Error::SpaceMismatch);
    }
    let (g_ac, g_bc) = schedule.controls(t)?;
    let h = model.hamiltonian(g_ac, g_bc);
    let (h, r) = (h.matrix(), rho.matrix());
    let mut out = (h * r - r * h) * (-I);
    for d in &model.dissipators {
        let c = d.collapse.matrix();
        let cd = c.adjoint();
        let cdc = &cd * c;
        out += (c * r * &cd - (&cdc * r + r * &cdc) * C64::new(0.5, 0.0)) * C64::new(d.rate, 0.0);
    }
    OperatorMatrix::new(model.space.clone(), out)
}

/// Integrates `rho0` over the full pulse on the full Hilbert space.
pub fn evolve(
    rho0: &DensityMatrix,
    model: &LindbladModel,
    schedule: &PulseSchedule,
    config: &IntegratorConfig,
    sample_times: Option<&[f64]>,
) -> Result<EvolutionResult> {
    if rho0.space() != &model.space {
        return Err(Error::SpaceMismatch);
    }
    let basis: Vec<usize> = (0..model.space.total_dimension()).collect();
    let rhs = LindbladRhs::new(model);
    run(
        rho0.matrix().clone(),
        rhs,
        &model.space,
        &basis,
        schedule,
        config,
        sample_times,
    )
}

/// Basis indices of the vacuum and single-excitation states, vacuum first.
pub fn subspace_indices(space: &CompositeSpace) -> Vec<usize> {
    let mut idx = vec![0];
    idx.extend(single_excitation_basis(space));
    idx
}

/// Same dynamics as [`evolve`] restricted to states with at most one
/// excitation, which the Hamiltonian and all dissipators leave invariant.
/// The result is embedded back into the full space.
pub fn evolve_subspace(
    rho0: &DensityMatrix,
    model: &LindbladModel,
    schedule: &PulseSchedule,
    config: &IntegratorConfig,
    sample_times: Option<&[f64]>,
) -> Result<EvolutionResult> {
    if rho0.space() != &model.space {
        return Err(Error::SpaceMismatch);
    }
    let idx = subspace_indices(&model.space);
    let full = rho0.matrix();
    let inside: f64 = idx.iter().map(|&i| full[(i, i)].re).sum();
    let weight = (full.trace().re - inside).abs();
    if weight > 1e-12 {
        return Err(Error::OutsideSubspace { weight });
    }
    let restrict =
        |m: &DMatrix<C64>| DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])]);
    let diss: Vec<(f64, DMatrix<C64>)> = model
        .dissipators
        .iter()
        .map(|d| (d.rate, restrict(d.collapse.matrix())))
        .collect();
    let diss_refs: Vec<(f64, &DMatrix<C64>)> = diss.iter().map(|(r, m)| (*r, m)).collect();
    let rhs = LindbladRhs::from_dense(
        &restrict(model.static_h.matrix()),
        &restrict(model.coupling_a.matrix()),
        &restrict(model.coupling_b.matrix()),
        &diss_refs,
    );
    run(
        restrict(full),
        rhs,
        &model.space,
        &idx,
        schedule,
        config,
        sample_times,
    )
}

/// Shared driver. `basis[k]` is the full-space index of reduced basis state `k`.
fn run(
    rho0: DMatrix<C64>,
    mut rhs: LindbladRhs,
    space: &CompositeSpace,
    basis: &[usize],
    schedule: &PulseSchedule,
    config: &IntegratorConfig,
    sample_times: Option<&[f64]>,
) -> Result<EvolutionResult> {
    config.validate()?;
    let start = Instant::now();
    let tau = schedule.duration();
    let d = basis.len();

    let mut samples: Vec<f64> = sample_times.map(<[f64]>::to_vec).unwrap_or_default();
    if samples.iter().any(|t| !(*t >= 0.0 && *t <= tau)) {
        return Err(invalid(format!("sample times must lie in [0, {tau:e}] s")));
    }
    if samples.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("sample times must be ascending"));
    }
    let n_user = samples.len();
    if samples.last().is_none_or(|&t| t < tau) {
        samples.push(tau);
    }

    let occupations: Vec<Vec<usize>> = basis.iter().map(|&i| space.occupation(i)).collect();
    let mut columns: Vec<String> = space
        .subsystems()
        .iter()
        .map(|s| format!("n_{}", s.label))
        .collect();
    columns.push("trace".into());
    let mut rows = Vec::with_capacity(n_user);

    let trace0 = rho0.trace();
    let mut y: Vec<C64> = rho0.as_slice().to_vec();
    let mut diag = Diagnostics::default();

    let stats = dop853::integrate(
        |t, y: &[C64], dy: &mut [C64]| {
            let (g_ac, g_bc) = controls_at(schedule, t);
            rhs.apply(g_ac, g_bc, y, dy);
        },
        0.0,
        &mut y,
        &samples,
        &config.options(tau),
        |ev, t, y| {
            match ev {
                Event::Step if config.check_invariants => {
                    let tr = (0..d).map(|i| y[i * d + i]).sum::<C64>();
                    let drift = (tr - trace0).norm();
                    let herm = hermiticity_slice(y, d);
                    diag.max_trace_drift = diag.max_trace_drift.max(drift);
                    diag.max_hermiticity_error = diag.max_hermiticity_error.max(herm);
                    if drift > ABORT_FACTOR * TRACE_TOLERANCE {
                        return Err(Error::InvariantViolation {
                            t,
                            what: format!("trace drift {drift:.3e}"),
                        });
                    }
                    if herm > ABORT_FACTOR * HERMITICITY_TOLERANCE {
                        return Err(Error::InvariantViolation {
                            t,
                            what: format!("hermiticity error {herm:.3e}"),
                        });
                    }
                }
                Event::Sample(k) if k < n_user => {
                    let mut vals = vec![0.0; columns.len()];
                    let mut tr = 0.0;
                    for (i, occ) in occupations.iter().enumerate() {
                        let p = y[i * d + i].re;
                        tr += p;
                        for (v, n) in vals.iter_mut().zip(occ) {
                            *v += p * *n as f64;
                        }
                    }
                    *vals.last_mut().expect("trace column") = tr;
                    rows.push((t, vals));
                }
                _ => {}
            }
            Ok(())
        },
    )?;

    diag.accepted_steps = stats.accepted;
    diag.rejected_steps = stats.rejected;
    diag.rhs_evaluations = stats.rhs_evals;

    let reduced = DMatrix::from_column_slice(d, d, &y);
    let tol = StateTolerances {
        hermiticity: HERMITICITY_TOLERANCE,
        trace: TRACE_TOLERANCE,
        min_eigenvalue: config.positivity_tolerance(),
    };
    let full_dim = space.total_dimension();
    let entries = if d == full_dim && basis.iter().enumerate().all(|(k, &i)| k == i) {
        reduced.clone()
    } else {
        let mut m = DMatrix::zeros(full_dim, full_dim);
        for (a, &i) in basis.iter().enumerate() {
            for (b, &j) in basis.iter().enumerate() {
                m[(i, j)] = reduced[(a, b)];
            }
        }
        m
    };
    // Checked on the reduced block; zero padding changes nothing.
    check_state(&reduced, trace0, tol)
        .map_err(|what| Error::InvariantViolation { t: tau, what })?;

    diag.wall_time_s = start.elapsed().as_secs_f64();
    Ok(EvolutionResult {
        final_state: DensityMatrix::from_raw(space.clone(), entries),
        sampled: sampled_or_none(sample_times, columns, rows),
        diagnostics: diag,
    })
}

fn sampled_or_none(
    requested: Option<&[f64]>,
    columns: Vec<String>,
    rows: Vec<(f64, Vec<f64>)>,
) -> Option<Trajectory> {
    requested.map(|_| Trajectory { columns, rows })
}

fn hermiticity_slice(y: &[C64], d: usize) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..d {
        for i in 0..=j {
            worst = worst.max((y[j * d + i] - y[i * d + j].conj()).norm());
        }
    }
    worst
}

fn check_state(
    m: &DMatrix<C64>,
    trace0: C64,
    tol: StateTolerances,
) -> std::result::Result<(), String> {
    let herm = hermiticity_error(m);
    if herm > tol.hermiticity {
        return Err(format!("final hermiticity error {herm:.3e}"));
    }
    let drift = (m.trace() - trace0).norm();
    if drift > tol.trace {
        return Err(format!("final trace drift {drift:.3e}"));
    }
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let min_eig = h
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min_eig < tol.min_eigenvalue {
        return Err(format!("final minimum eigenvalue {min_eig:.3e}"));
    }
    Ok(())
}
