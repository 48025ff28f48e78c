//! Multimode interconnect Hamiltonian and dissipators.
//!
//! Everything is expressed in the frame rotating at the center-mode frequency
//! `ω_nc`: qubits carry their static detuning `δ_q` and mode `n` carries
//! `(n - n_c)·Δ_c`. The coupling terms are already in rotating-wave form and
//! commute with the total excitation number, so this frame is exact. Mode loss
//! rates are still derived from the lab-frame mode frequency.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hilbert::{lowering_on, number_on, CompositeSpace, OperatorMatrix, SubsystemKind, C64};

/// Relative sign of qubit-b couplings across interconnect modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SignRule {
    /// `(-1)^(n - n_c)`: center mode `+`, adjacent modes `-`, next `+`.
    #[default]
    Alternating,
    /// Same sign on every mode (hypothetical control case).
    Uniform,
}

impl SignRule {
    pub fn sign(self, offset: i64) -> f64 {
        match self {
            SignRule::Alternating if offset.rem_euclid(2) == 1 => -1.0,
            _ => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SignRule::Alternating => "alternating",
            SignRule::Uniform => "uniform",
        }
    }
}

impl std::str::FromStr for SignRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alternating" => Ok(SignRule::Alternating),
            "uniform" => Ok(SignRule::Uniform),
            other => Err(invalid(format!("unknown sign rule `{other}`"))),
        }
    }
}

/// Physical parameters, SI units (rad/s, s). Infinite lifetimes and quality
/// factors switch the corresponding channel off.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub center_frequency: f64,
    pub fsr: f64,
    pub side_modes: usize,
    pub detuning_a: f64,
    pub detuning_b: f64,
    pub anharmonicity_a: f64,
    pub anharmonicity_b: f64,
    pub peak_coupling: f64,
    pub t1_a: f64,
    pub t1_b: f64,
    pub t2phi_a: f64,
    pub t2phi_b: f64,
    pub quality_factor: f64,
    pub sign_rule: SignRule,
    pub qubit_levels: usize,
    pub mode_levels: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            center_frequency: 2.0 * PI * 5e9,
            fsr: 2.0 * PI * 100e6,
            side_modes: 2,
            detuning_a: 0.0,
            detuning_b: 0.0,
            anharmonicity_a: -2.0 * PI * 300e6,
            anharmonicity_b: -2.0 * PI * 300e6,
            peak_coupling: 2.0 * PI * 15e6,
            t1_a: f64::INFINITY,
            t1_b: f64::INFINITY,
            t2phi_a: f64::INFINITY,
            t2phi_b: f64::INFINITY,
            quality_factor: f64::INFINITY,
            sign_rule: SignRule::Alternating,
            qubit_levels: 2,
            mode_levels: 2,
        }
    }
}

impl ModelParams {
    /// Coherent defaults with `N` side modes on each side of the center mode.
    pub fn coherent(peak_coupling: f64, side_modes: usize) -> Self {
        Self {
            peak_coupling,
            side_modes,
            ..Self::default()
        }
    }

    pub fn with_t1(mut self, t1: f64) -> Self {
        self.t1_a = t1;
        self.t1_b = t1;
        self
    }

    pub fn with_t2phi(mut self, t2phi: f64) -> Self {
        self.t2phi_a = t2phi;
        self.t2phi_b = t2phi;
        self
    }

    pub fn with_quality_factor(mut self, q: f64) -> Self {
        self.quality_factor = q;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !(self.fsr.is_finite() && self.fsr > 0.0) {
            return Err(invalid(format!(
                "FSR must be positive and finite, got {}",
                self.fsr
            )));
        }
        if !(self.center_frequency.is_finite() && self.center_frequency > 0.0) {
            return Err(invalid("center frequency must be positive and finite"));
        }
        if !finite_nonneg(self.peak_coupling) {
            return Err(invalid(format!(
                "peak coupling must be finite and >= 0, got {}",
                self.peak_coupling
            )));
        }
        for (name, v) in [
            ("T1_a", self.t1_a),
            ("T1_b", self.t1_b),
            ("T2phi_a", self.t2phi_a),
            ("T2phi_b", self.t2phi_b),
            ("Q_c", self.quality_factor),
        ] {
            if !(v > 0.0) {
                return Err(invalid(format!(
                    "{name} must be > 0 (or infinite), got {v}"
                )));
            }
        }
        for v in [
            self.detuning_a,
            self.detuning_b,
            self.anharmonicity_a,
            self.anharmonicity_b,
        ] {
            if !v.is_finite() {
                return Err(invalid("detunings and anharmonicities must be finite"));
            }
        }
        if self.qubit_levels < 2
            || self.qubit_levels > 3
            || self.mode_levels < 2
            || self.mode_levels > 3
        {
            return Err(invalid("qubit and mode truncations must be 2 or 3 levels"));
        }
        Ok(())
    }

    pub fn mode_offsets(&self) -> impl Iterator<Item = i64> {
        let n = self.side_modes as i64;
        -n..=n
    }

    /// Composite space matching these parameters.
    pub fn space(&self) -> Result<CompositeSpace> {
        CompositeSpace::multimode(self.side_modes, self.qubit_levels, self.mode_levels)
    }
}

/// Subsystem index of qubit `a`, mode offset `m`, and qubit `b` in the
/// multimode layout.
#[derive(Clone, Copy, Debug)]
pub struct Layout {
    pub side_modes: usize,
}

impl Layout {
    pub fn qubit_a(self) -> usize {
        0
    }

    pub fn qubit_b(self) -> usize {
        2 * self.side_modes + 2
    }

    pub fn mode(self, offset: i64) -> usize {
        (offset + self.side_modes as i64 + 1) as usize
    }
}

fn check_layout(params: &ModelParams, space: &CompositeSpace) -> Result<Layout> {
    let want = 2 * params.side_modes + 3;
    if space.len() != want {
        return Err(Error::LayoutMismatch(format!(
            "{} subsystems for N = {} (expected {want})",
            space.len(),
            params.side_modes
        )));
    }
    let subs = space.subsystems();
    let layout = Layout {
        side_modes: params.side_modes,
    };
    if subs[layout.qubit_a()].kind != SubsystemKind::Qubit
        || subs[layout.qubit_b()].kind != SubsystemKind::Qubit
    {
        return Err(Error::LayoutMismatch(
            "first and last subsystems must be qubits".into(),
        ));
    }
    if subs[1..want - 1]
        .iter()
        .any(|s| s.kind != SubsystemKind::Mode)
    {
        return Err(Error::LayoutMismatch(
            "inner subsystems must be interconnect modes".into(),
        ));
    }
    Ok(layout)
}

/// Layout of a space built for the interconnect model, inferred from its size.
pub fn infer_layout(space: &CompositeSpace) -> Result<Layout> {
    if space.len() < 3 || space.len().is_multiple_of(2) {
        return Err(Error::LayoutMismatch(format!(
            "{} subsystems is not a multimode layout",
            space.len()
        )));
    }
    let params = ModelParams {
        side_modes: (space.len() - 3) / 2,
        ..ModelParams::default()
    };
    check_layout(&params, space)
}

/// Diagonal rotating-frame part: detunings, Kerr terms, and mode offsets.
pub fn build_static_hamiltonian(
    params: &ModelParams,
    space: &CompositeSpace,
) -> Result<OperatorMatrix> {
    let layout = check_layout(params, space)?;
    let mut h = OperatorMatrix::zeros(space);
    let qubit_energy = |n: usize, delta: f64, alpha: f64| {
        let n = n as f64;
        delta * n + 0.5 * alpha * n * (n - 1.0)
    };
    for i in 0..space.total_dimension() {
        let occ = space.occupation(i);
        let mut e = qubit_energy(
            occ[layout.qubit_a()],
            params.detuning_a,
            params.anharmonicity_a,
        ) + qubit_energy(
            occ[layout.qubit_b()],
            params.detuning_b,
            params.anharmonicity_b,
        );
        for m in params.mode_offsets() {
            e += m as f64 * params.fsr * occ[layout.mode(m)] as f64;
        }
        h.entries_mut()[(i, i)] = C64::new(e, 0.0);
    }
    Ok(h)
}

/// Unit-amplitude exchange generators `(Σ_n a c_n† + h.c., Σ_n s_n b c_n† + h.c.)`.
pub fn coupling_generators(
    params: &ModelParams,
    space: &CompositeSpace,
) -> Result<(OperatorMatrix, OperatorMatrix)> {
    let layout = check_layout(params, space)?;
    let a = lowering_on(space, layout.qubit_a())?;
    let b = lowering_on(space, layout.qubit_b())?;
    let mut ha = OperatorMatrix::zeros(space);
    let mut hb = OperatorMatrix::zeros(space);
    for m in params.mode_offsets() {
        let c = lowering_on(space, layout.mode(m))?;
        let cd = c.adjoint();
        let term_a = a.compose(&cd)?;
        let term_b = b.compose(&cd)?;
        ha = ha.plus(&term_a)?.plus(&term_a.adjoint())?;
        let s = C64::new(params.sign_rule.sign(m), 0.0);
        hb = hb
            .plus(&term_b.scaled(s))?
            .plus(&term_b.adjoint().scaled(s))?;
    }
    Ok((ha, hb))
}

/// Exchange Hamiltonian for instantaneous control amplitudes `g_ac`, `g_bc`.
pub fn build_coupling_hamiltonian(
    params: &ModelParams,
    space: &CompositeSpace,
    g_ac: f64,
    g_bc: f64,
) -> Result<OperatorMatrix> {
    if !g_ac.is_finite() || !g_bc.is_finite() {
        return Err(invalid("coupling amplitudes must be finite"));
    }
    let (ha, hb) = coupling_generators(params, space)?;
    ha.scaled(C64::new(g_ac, 0.0))
        .plus(&hb.scaled(C64::new(g_bc, 0.0)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Channel {
    Relaxation(char),
    Dephasing(char),
    ModeLoss(i64),
}

/// One Lindblad channel `rate · D[collapse]`.
#[derive(Clone, Debug)]
pub struct DissipatorSpec {
    pub rate: f64,
    pub collapse: OperatorMatrix,
    pub channel: Channel,
}

/// Loss rate of mode offset `n - n_c`, `κ = ω_n / Q_c` with the lab-frame
/// mode frequency.
pub fn kappa_of_mode(params: &ModelParams, offset: i64) -> Result<f64> {
    if offset.unsigned_abs() as usize > params.side_modes {
        return Err(invalid(format!(
            "mode offset {offset} outside ±{}",
            params.side_modes
        )));
    }
    if params.quality_factor.is_infinite() {
        return Ok(0.0);
    }
    Ok((params.center_frequency + offset as f64 * params.fsr) / params.quality_factor)
}

/// Relaxation and pure dephasing for each qubit, then loss for each mode.
/// Channels with zero rate are omitted.
pub fn build_dissipators(
    params: &ModelParams,
    space: &CompositeSpace,
) -> Result<Vec<DissipatorSpec>> {
    let layout = check_layout(params, space)?;
    let mut out = Vec::new();
    for (label, idx, t1) in [
        ('a', layout.qubit_a(), params.t1_a),
        ('b', layout.qubit_b(), params.t1_b),
    ] {
        if t1.is_finite() {
            out.push(DissipatorSpec {
                rate: 1.0 / t1,
                collapse: lowering_on(space, idx)?,
                channel: Channel::Relaxation(label),
            });
        }
    }
    for (label, idx, t2) in [
        ('a', layout.qubit_a(), params.t2phi_a),
        ('b', layout.qubit_b(), params.t2phi_b),
    ] {
        if t2.is_finite() {
            out.push(DissipatorSpec {
                rate: 2.0 / t2,
                collapse: number_on(space, idx)?,
                channel: Channel::Dephasing(label),
            });
        }
    }
    for m in params.mode_offsets() {
        let kappa = kappa_of_mode(params, m)?;
        if kappa > 0.0 {
            out.push(DissipatorSpec {
                rate: kappa,
                collapse: lowering_on(space, layout.mode(m))?,
                channel: Channel::ModeLoss(m),
            });
        }
    }
    Ok(out)
}

/// Precomputed operator set for one run:
/// `H(t) = H_static + g_ac(t)·H_a + g_bc(t)·H_b` plus dissipators.
#[derive(Clone, Debug)]
pub struct LindbladModel {
    pub params: ModelParams,
    pub space: CompositeSpace,
    pub static_h: OperatorMatrix,
    pub coupling_a: OperatorMatrix,
    pub coupling_b: OperatorMatrix,
    pub dissipators: Vec<DissipatorSpec>,
}

impl LindbladModel {
    pub fn build(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        let space = params.space()?;
        let static_h = build_static_hamiltonian(params, &space)?;
        let (coupling_a, coupling_b) = coupling_generators(params, &space)?;
        let dissipators = build_dissipators(params, &space)?;
        Ok(Self {
            params: params.clone(),
            space,
            static_h,
            coupling_a,
            coupling_b,
            dissipators,
        })
    }

    pub fn layout(&self) -> Layout {
        Layout {
            side_modes: self.params.side_modes,
        }
    }

    pub fn hamiltonian(&self, g_ac: f64, g_bc: f64) -> OperatorMatrix {
        let mut m = self.static_h.matrix().clone();
        m += self.coupling_a.matrix() * C64::new(g_ac, 0.0);
        m += self.coupling_b.matrix() * C64::new(g_bc, 0.0);
        OperatorMatrix::new(self.space.clone(), m).expect("same space")
    }
}

/// Basis indices of the single-excitation states, in subsystem order
/// (`|1_a⟩`, `|1_{c,-N}⟩`, ..., `|1_{c,+N}⟩`, `|1_b⟩`).
pub fn single_excitation_basis(space: &CompositeSpace) -> Vec<usize> {
    (0..space.len())
        .map(|k| {
            let mut occ = vec![0; space.len()];
            occ[k] = 1;
            space.basis_index(&occ).expect("valid occupation")
        })
        .collect()
}

/// Restriction of `op` to the single-excitation states.
pub fn restrict_to_single_excitation(op: &OperatorMatrix) -> DMatrix<C64> {
    let basis = single_excitation_basis(op.space());
    DMatrix::from_fn(basis.len(), basis.len(), |i, j| {
        op.matrix()[(basis[i], basis[j])]
    })
}
