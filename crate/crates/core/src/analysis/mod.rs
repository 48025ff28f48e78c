//! Figures of merit and analytic estimates.
//!
//! The three-level helpers ([`dark_state`], [`bright_states`],
//! [`stirap_hamiltonian`]) use the single-excitation basis
//! `(|1_a⟩, |1_c⟩, |1_b⟩)` of one qubit pair coupled through one mode.

pub mod quadrature;

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hilbert::{CompositeSpace, DensityMatrix, C64};
use crate::model::infer_layout;
use crate::pulses::AngleProfile;

const ZERO: C64 = C64::new(0.0, 0.0);

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    Transfer,
    Bell,
}

impl TargetKind {
    /// Final mixing angle reaching this target from `|1_a⟩`.
    pub fn theta_p(self) -> f64 {
        match self {
            TargetKind::Transfer => PI / 2.0,
            TargetKind::Bell => PI / 4.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TargetKind::Transfer => "transfer",
            TargetKind::Bell => "bell",
        }
    }
}

impl std::str::FromStr for TargetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transfer" => Ok(TargetKind::Transfer),
            "bell" => Ok(TargetKind::Bell),
            other => Err(invalid(format!("unknown target `{other}`"))),
        }
    }
}

/// Ideal final pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetState {
    pub kind: TargetKind,
    space: CompositeSpace,
    vector: DVector<C64>,
}

fn qubit_excited(space: &CompositeSpace, which: usize) -> Result<usize> {
    let mut occ = vec![0; space.len()];
    occ[which] = 1;
    space.basis_index(&occ)
}

impl TargetState {
    /// `|0_a, 0…0, 1_b⟩`. The protocol actually lands on `-|0_a 0…0 1_b⟩`;
    /// the sign does not enter a projector.
    pub fn transfer(space: &CompositeSpace) -> Result<Self> {
        let layout = infer_layout(space)?;
        let mut v = DVector::zeros(space.total_dimension());
        v[qubit_excited(space, layout.qubit_b())?] = re(1.0);
        Ok(Self {
            kind: TargetKind::Transfer,
            space: space.clone(),
            vector: v,
        })
    }

    /// `(|1_a 0…0 0_b⟩ - |0_a 0…0 1_b⟩) / √2`
    pub fn bell(space: &CompositeSpace) -> Result<Self> {
        Self::bell_with_phase(space, PI)
    }

    /// `(|1_a 0…0 0_b⟩ + e^{iφ} |0_a 0…0 1_b⟩) / √2`
    pub fn bell_with_phase(space: &CompositeSpace, phase: f64) -> Result<Self> {
        let layout = infer_layout(space)?;
        let mut v = DVector::zeros(space.total_dimension());
        v[qubit_excited(space, layout.qubit_a())?] = re(FRAC_1_SQRT_2);
        v[qubit_excited(space, layout.qubit_b())?] = C64::from_polar(FRAC_1_SQRT_2, phase);
        Ok(Self {
            kind: TargetKind::Bell,
            space: space.clone(),
            vector: v,
        })
    }

    pub fn new(kind: TargetKind, space: &CompositeSpace) -> Result<Self> {
        match kind {
            TargetKind::Transfer => Self::transfer(space),
            TargetKind::Bell => Self::bell(space),
        }
    }

    pub fn space(&self) -> &CompositeSpace {
        &self.space
    }

    pub fn vector(&self) -> &DVector<C64> {
        &self.vector
    }
}

/// `|1_a, 0…0, 0_b⟩`, the initial state of every protocol.
pub fn initial_state(space: &CompositeSpace) -> Result<DensityMatrix> {
    let layout = infer_layout(space)?;
    let mut occ = vec![0; space.len()];
    occ[layout.qubit_a()] = 1;
    crate::hilbert::basis_state(space, &occ)
}

/// `E = 1 - ⟨ψ|ρ|ψ⟩`, unclipped.
pub fn fidelity_error(rho: &DensityMatrix, target: &TargetState) -> Result<f64> {
    if rho.space() != target.space() {
        return Err(Error::SpaceMismatch);
    }
    let psi = &target.vector;
    let overlap = (psi.adjoint() * rho.matrix() * psi)[(0, 0)];
    Ok(1.0 - overlap.re)
}

/// Error against the Bell-type target with relative phase `φ` for each phase.
pub fn bell_phase_scan(rho: &DensityMatrix, phases: &[f64]) -> Result<Vec<(f64, f64)>> {
    phases
        .iter()
        .map(|&phi| {
            Ok((
                phi,
                fidelity_error(rho, &TargetState::bell_with_phase(rho.space(), phi)?)?,
            ))
        })
        .collect()
}

/// Three-level Lambda Hamiltonian `g sinθ (|a⟩⟨c| + h.c.) + g cosθ (|b⟩⟨c| + h.c.)`.
pub fn stirap_hamiltonian(theta: f64, g: f64) -> DMatrix<C64> {
    let (s, c) = theta.sin_cos();
    let mut h = DMatrix::zeros(3, 3);
    h[(0, 1)] = re(g * s);
    h[(1, 0)] = re(g * s);
    h[(2, 1)] = re(g * c);
    h[(1, 2)] = re(g * c);
    h
}

/// Zero-energy eigenvector `cosθ|1_a⟩ - sinθ|1_b⟩`.
pub fn dark_state(theta: f64) -> DVector<C64> {
    let (s, c) = theta.sin_cos();
    DVector::from_vec(vec![re(c), ZERO, re(-s)])
}

/// Eigenvectors with energies `±g`: `(sinθ|1_a⟩ ± |1_c⟩ + cosθ|1_b⟩)/√2`.
pub fn bright_states(theta: f64) -> (DVector<C64>, DVector<C64>) {
    let (s, c) = theta.sin_cos();
    let r = FRAC_1_SQRT_2;
    (
        DVector::from_vec(vec![re(r * s), re(r), re(r * c)]),
        DVector::from_vec(vec![re(r * s), re(-r), re(r * c)]),
    )
}

/// Leading-order non-adiabatic transition strengths towards `B₊` and `B₋`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakageEstimate {
    /// `|∫ θ̇ e^{-igt} dt|²`
    pub plus: f64,
    /// `|∫ θ̇ e^{+igt} dt|²`
    pub minus: f64,
}

impl LeakageEstimate {
    pub fn total(&self) -> f64 {
        self.plus + self.minus
    }

    /// Expected final error. `⟨B±|∂_θ D⟩ = -1/√2`, so each branch carries
    /// half of its integral.
    pub fn predicted_error(&self) -> f64 {
        0.5 * self.total()
    }
}

pub fn stirap_leakage_estimate(profile: &AngleProfile, g: f64) -> Result<LeakageEstimate> {
    if !(g > 0.0 && g.is_finite()) {
        return Err(invalid("leakage estimate needs finite g > 0"));
    }
    let tau = profile.tau_p;
    // integrate in units of tau so tolerances are dimensionless
    let branch = |sign: f64| -> Result<f64> {
        let q = quadrature::integrate(
            |s| {
                let th = profile.theta(s * tau).expect("s in [0, 1]");
                C64::from_polar(th.rate * tau, -sign * g * tau * s)
            },
            0.0,
            1.0,
            1e-14,
            1e-13,
        )?;
        Ok(q.value.norm_sqr())
    };
    Ok(LeakageEstimate {
        plus: branch(1.0)?,
        minus: branch(-1.0)?,
    })
}

/// Approximate dark state of the alternating-sign three-mode model,
/// ordered `(a, c_{-1}, c_0, c_{+1}, b)`.
pub fn pseudo_dark_state(theta: f64, g: f64, delta_c: f64) -> Result<DVector<C64>> {
    if !(delta_c > 0.0) {
        return Err(invalid("FSR must be positive"));
    }
    let (s, c) = theta.sin_cos();
    let x = g / delta_c * (2.0 * theta).sin();
    let v = DVector::from_vec(vec![re(c), re(x), ZERO, re(-x), re(-s)]);
    let n = v.norm();
    Ok(v / re(n))
}

/// Residual error `2 (g/Δ_c)² sin²(2θ_p)` from the pseudo-dark state's
/// end overlap with the two odd modes.
pub fn adiabatic_floor(theta_p: f64, g: f64, delta_c: f64) -> Result<f64> {
    if !(delta_c > 0.0) || !(g >= 0.0) {
        return Err(invalid("need g >= 0 and FSR > 0"));
    }
    if g >= delta_c {
        return Err(invalid(format!(
            "floor estimate needs g < FSR (g/FSR = {:.3})",
            g / delta_c
        )));
    }
    let r = g / delta_c;
    Ok(2.0 * r * r * (2.0 * theta_p).sin().powi(2))
}

/// [`adiabatic_floor`] at the Bell angle `θ_p = π/4`: `2 (g/Δ_c)²`.
pub fn adiabatic_bell_floor(g: f64, delta_c: f64) -> Result<f64> {
    adiabatic_floor(PI / 4.0, g, delta_c)
}

/// Where the excitation sits at the end of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakageBreakdown {
    /// `(n - n_c, ⟨n⟩)` for every interconnect mode.
    pub modes: Vec<(i64, f64)>,
    pub qubit_a: f64,
    pub qubit_b: f64,
    /// Population of states with two or more excitations.
    pub residual: f64,
    pub vacuum: f64,
}

impl LeakageBreakdown {
    pub fn total_mode_population(&self) -> f64 {
        self.modes.iter().map(|m| m.1).sum()
    }

    /// `m-2:1.2e-3;m-1:…;a:…;b:…;res:…;vac:…`
    pub fn encode(&self) -> String {
        let mut parts: Vec<String> = self
            .modes
            .iter()
            .map(|(m, p)| format!("m{m:+}:{p:.6e}"))
            .collect();
        parts.push(format!("a:{:.6e}", self.qubit_a));
        parts.push(format!("b:{:.6e}", self.qubit_b));
        parts.push(format!("res:{:.6e}", self.residual));
        parts.push(format!("vac:{:.6e}", self.vacuum));
        parts.join(";")
    }
}

pub fn leakage_breakdown(rho: &DensityMatrix) -> Result<LeakageBreakdown> {
    let space = rho.space();
    let layout = infer_layout(space)?;
    let n_modes = 2 * layout.side_modes + 1;
    let mut occ_mean = vec![0.0; space.len()];
    let (mut residual, mut vacuum) = (0.0, 0.0);
    for i in 0..space.total_dimension() {
        let p = rho.matrix()[(i, i)].re;
        if p == 0.0 {
            continue;
        }
        let occ = space.occupation(i);
        let total: usize = occ.iter().sum();
        match total {
            0 => vacuum += p,
            1 => {}
            _ => residual += p,
        }
        for (m, n) in occ_mean.iter_mut().zip(&occ) {
            *m += p * *n as f64;
        }
    }
    let modes = (0..n_modes)
        .map(|k| {
            let offset = k as i64 - layout.side_modes as i64;
            (offset, occ_mean[layout.mode(offset)])
        })
        .collect();
    Ok(LeakageBreakdown {
        modes,
        qubit_a: occ_mean[layout.qubit_a()],
        qubit_b: occ_mean[layout.qubit_b()],
        residual,
        vacuum,
    })
}

/// Gate error when a remote gate is built from a local one plus two
/// transfers: `E_gate + 2 E_transfer`.
pub fn indirect_gate_error(gate_error: f64, transfer_error: f64) -> Result<f64> {
    for v in [gate_error, transfer_error] {
        if !(0.0..=1.0).contains(&v) {
            return Err(invalid(format!("error {v} outside [0, 1]")));
        }
    }
    Ok(gate_error + 2.0 * transfer_error)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::basis_state;
    use crate::lindblad::{evolve, evolve_subspace, IntegratorConfig};
    use crate::model::{LindbladModel, ModelParams, SignRule};
    use crate::pulses::{ProfileKind, Protocol, PulseSchedule};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const MHZ: f64 = 2.0 * PI * 1e6;

    fn inner(a: &DVector<C64>, b: &DVector<C64>) -> C64 {
        (a.adjoint() * b)[(0, 0)]
    }

    fn sorted_eigen(h: &DMatrix<C64>) -> Vec<(f64, DVector<C64>)> {
        let eig = h.clone().symmetric_eigen();
        let mut pairs: Vec<(f64, DVector<C64>)> = (0..h.nrows())
            .map(|k| (eig.eigenvalues[k], eig.eigenvectors.column(k).into_owned()))
            .collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        pairs
    }

    #[test]
    fn fidelity_error_trivial_cases() {
        let space = CompositeSpace::multimode(1, 2, 2).unwrap();
        let t = TargetState::transfer(&space).unwrap();
        let on = DensityMatrix::from_pure(space.clone(), t.vector()).unwrap();
        assert_abs_diff_eq!(fidelity_error(&on, &t).unwrap(), 0.0, epsilon = 1e-15);
        let off = initial_state(&space).unwrap();
        assert_abs_diff_eq!(fidelity_error(&off, &t).unwrap(), 1.0, epsilon = 1e-15);
        let half =
            DensityMatrix::new(space.clone(), (on.matrix() + off.matrix()) * re(0.5)).unwrap();
        assert_abs_diff_eq!(fidelity_error(&half, &t).unwrap(), 0.5, epsilon = 1e-15);

        let other = CompositeSpace::multimode(0, 2, 2).unwrap();
        assert!(matches!(
            fidelity_error(&initial_state(&other).unwrap(), &t),
            Err(Error::SpaceMismatch)
        ));
    }

    #[test]
    fn bell_target_sign_and_phase_scan() {
        let space = CompositeSpace::multimode(0, 2, 2).unwrap();
        let bell = TargetState::bell(&space).unwrap();
        let v = bell.vector();
        assert_abs_diff_eq!(v.norm(), 1.0, epsilon = 1e-15);
        let ia = space.basis_index(&[1, 0, 0]).unwrap();
        let ib = space.basis_index(&[0, 0, 1]).unwrap();
        assert_abs_diff_eq!(v[ia].re, FRAC_1_SQRT_2);
        assert_abs_diff_eq!(v[ib].re, -FRAC_1_SQRT_2, epsilon = 1e-15);
        let rho = DensityMatrix::from_pure(space.clone(), v).unwrap();
        let scan = bell_phase_scan(&rho, &[0.0, PI / 2.0, PI]).unwrap();
        assert_abs_diff_eq!(scan[0].1, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(scan[1].1, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(scan[2].1, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn dark_and_bright_examples() {
        assert_eq!(
            dark_state(0.0),
            DVector::from_vec(vec![re(1.0), ZERO, re(-0.0)])
        );
        let d = dark_state(PI / 2.0);
        assert_abs_diff_eq!(d[2].re, -1.0);
        assert_abs_diff_eq!(d[0].re, 0.0, epsilon = 1e-16);
        let d = dark_state(0.3);
        let (bp, bm) = bright_states(0.3);
        assert!(inner(&d, &bp).norm() < 1e-16);
        assert!(inner(&d, &bm).norm() < 1e-16);
        assert!(inner(&bp, &bm).norm() < 1e-16);
    }

    #[test]
    fn eigen_oracle_random_angles() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let g = 1.0;
        for _ in 0..50 {
            let theta = rng.random_range(0.0..PI / 2.0);
            let h = stirap_hamiltonian(theta, g);
            let eig = sorted_eigen(&h);
            let (bp, bm) = bright_states(theta);
            let want = [(-g, bm), (0.0, dark_state(theta)), (g, bp)];
            for ((val, vec), (wval, wvec)) in eig.iter().zip(want.iter()) {
                assert!((val - wval).abs() < 1e-12, "θ = {theta}: {val} vs {wval}");
                assert!(inner(vec, wvec).norm() >= 1.0 - 1e-12);
                let residual = (&h * wvec - wvec * re(*wval)).norm();
                assert!(residual < 1e-14);
            }
        }
    }

    #[test]
    fn magnus_examples() {
        let g = 15.0 * MHZ;
        let tau4 = 4.0 * PI / g;
        let lin = AngleProfile::transfer(ProfileKind::Linear, tau4).unwrap();
        let e = stirap_leakage_estimate(&lin, g).unwrap();
        assert!(e.plus < 1e-12 && e.minus < 1e-12, "{e:?}");

        let tau3 = 3.0 * PI / g;
        let lin = AngleProfile::transfer(ProfileKind::Linear, tau3).unwrap();
        let e = stirap_leakage_estimate(&lin, g).unwrap();
        assert_abs_diff_eq!(e.plus, 1.0 / 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.minus, 1.0 / 9.0, epsilon = 1e-12);

        let quint = AngleProfile::transfer(ProfileKind::Quintic, tau3).unwrap();
        let q = stirap_leakage_estimate(&quint, g).unwrap();
        assert!(q.plus < e.plus && q.minus < e.minus);
        assert!(stirap_leakage_estimate(&quint, 0.0).is_err());
    }

    #[test]
    fn magnus_linear_closed_form() {
        let g = 7.0 * MHZ;
        for tau_ns in [30.0, 77.0, 140.0, 333.0] {
            let tau = tau_ns * 1e-9;
            let p = AngleProfile::bell(ProfileKind::Linear, tau).unwrap();
            let e = stirap_leakage_estimate(&p, g).unwrap();
            let want = (2.0 * p.theta_p / (g * tau)).powi(2) * (g * tau / 2.0).sin().powi(2);
            assert_abs_diff_eq!(e.plus, want, epsilon = 1e-13);
        }
    }

    /// Leading order holds on the lobes once `gτ ≥ 4π`. Near each minimum
    /// the exact zeros sit at `sqrt(g² + θ̇²)·τ = 2nπ`, so points within 0.2π
    /// of `gτ = 2nπ` are skipped.
    #[test]
    fn magnus_agrees_with_simulation() {
        let g = 10.0 * MHZ;
        let model = LindbladModel::build(&ModelParams::coherent(g, 0)).unwrap();
        let rho0 = initial_state(&model.space).unwrap();
        let target = TargetState::transfer(&model.space).unwrap();
        let mut checked = 0;
        for tau_ns in (200..=600).step_by(9) {
            let tau = tau_ns as f64 * 1e-9;
            let lobe = g * tau / PI;
            if (lobe - 2.0 * (lobe / 2.0).round()).abs() < 0.2 {
                continue;
            }
            let sched = PulseSchedule::standard(Protocol::Stirap, PI / 2.0, tau, g).unwrap();
            let est = stirap_leakage_estimate(&sched.profile, g)
                .unwrap()
                .predicted_error();
            if !(1e-3..=5e-2).contains(&est) {
                continue;
            }
            let res = evolve(&rho0, &model, &sched, &IntegratorConfig::default(), None).unwrap();
            let e = fidelity_error(&res.final_state, &target).unwrap();
            assert!(
                (e / est - 1.0).abs() < 0.3,
                "τ = {tau_ns} ns: sim {e} vs {est}"
            );
            checked += 1;
        }
        assert!(checked >= 20, "{checked}");
    }

    #[test]
    fn pseudo_dark_examples() {
        let g = 4.0 * MHZ;
        let d = 100.0 * MHZ;
        let v = pseudo_dark_state(0.0, g, d).unwrap();
        assert_eq!(
            v,
            DVector::from_vec(vec![re(1.0), ZERO, ZERO, re(-0.0), re(-0.0)])
        );
        let v = pseudo_dark_state(PI / 2.0, g, d).unwrap();
        assert_abs_diff_eq!(v[4].re, -1.0);
        assert!(v[1].norm() < 1e-16 && v[3].norm() < 1e-16);
        let v = pseudo_dark_state(PI / 4.0, g, d).unwrap();
        let norm = (1.0 + 2.0 * 0.04f64.powi(2)).sqrt();
        assert_abs_diff_eq!(v[1].re, 0.04 / norm, epsilon = 1e-15);
        assert_abs_diff_eq!(v[3].re, -0.04 / norm, epsilon = 1e-15);
        assert!(pseudo_dark_state(0.1, g, 0.0).is_err());
    }

    /// Three-mode single-excitation Hamiltonian with the given sign rule.
    fn three_mode_block(theta: f64, g: f64, delta: f64, rule: SignRule) -> DMatrix<C64> {
        let params = ModelParams {
            fsr: delta,
            sign_rule: rule,
            ..ModelParams::coherent(g, 1)
        };
        let model = LindbladModel::build(&params).unwrap();
        let h = model.hamiltonian(g * theta.sin(), g * theta.cos());
        crate::model::restrict_to_single_excitation(&h)
    }

    #[test]
    fn pseudo_dark_matches_exact_eigenvector() {
        let delta = 100.0 * MHZ;
        for ratio in [0.01, 0.02, 0.04, 0.05] {
            let g = ratio * delta;
            for theta in [0.2, PI / 4.0, 1.1] {
                let h = three_mode_block(theta, g, delta, SignRule::Alternating);
                let eig = sorted_eigen(&h);
                let (_, v) = eig
                    .iter()
                    .min_by(|x, y| x.0.abs().total_cmp(&y.0.abs()))
                    .unwrap();
                let approx = pseudo_dark_state(theta, g, delta).unwrap();
                let deficit = 1.0 - inner(v, &approx).norm_sqr();
                assert!(
                    deficit <= 10.0 * ratio.powi(4),
                    "g/Δ = {ratio}, θ = {theta}: {deficit}"
                );
            }
        }
    }

    #[test]
    fn uniform_sign_dark_state_has_no_mode_weight() {
        let delta = 100.0 * MHZ;
        let g = 5.0 * MHZ;
        for theta in [0.1, 0.5, PI / 4.0, 1.3] {
            let uni = sorted_eigen(&three_mode_block(theta, g, delta, SignRule::Uniform));
            let (val, v) = uni
                .iter()
                .min_by(|x, y| x.0.abs().total_cmp(&y.0.abs()))
                .unwrap();
            assert!(val.abs() < 1e-12 * g);
            let mode_weight: f64 = (1..4).map(|k| v[k].norm_sqr()).sum();
            assert!(mode_weight < 1e-12, "θ = {theta}: {mode_weight}");
            assert!(
                (inner(
                    v,
                    &DVector::from_vec(vec![re(theta.cos()), ZERO, ZERO, ZERO, re(-theta.sin())])
                )
                .norm()
                    - 1.0)
                    .abs()
                    < 1e-12
            );

            let alt = sorted_eigen(&three_mode_block(theta, g, delta, SignRule::Alternating));
            let (_, v) = alt
                .iter()
                .min_by(|x, y| x.0.abs().total_cmp(&y.0.abs()))
                .unwrap();
            let odd = v[1].norm_sqr() + v[3].norm_sqr();
            assert!(odd > 0.5 * 2.0 * (g / delta * (2.0 * theta).sin()).powi(2));
        }
    }

    #[test]
    fn floor_examples() {
        let f = adiabatic_bell_floor(4.0 * MHZ, 100.0 * MHZ).unwrap();
        assert_abs_diff_eq!(f, 3.2e-3, epsilon = 1e-15);
        assert_abs_diff_eq!(
            adiabatic_floor(PI / 2.0, 4.0 * MHZ, 100.0 * MHZ).unwrap(),
            0.0,
            epsilon = 1e-18
        );
        assert_eq!(adiabatic_bell_floor(0.0, 100.0 * MHZ).unwrap(), 0.0);
        assert!(adiabatic_bell_floor(200.0 * MHZ, 100.0 * MHZ).is_err());
    }

    #[test]
    fn breakdown_initial_and_sum_rule() {
        let params = ModelParams::coherent(15.0 * MHZ, 2).with_quality_factor(1e5);
        let model = LindbladModel::build(&params).unwrap();
        let rho0 = initial_state(&model.space).unwrap();
        let b = leakage_breakdown(&rho0).unwrap();
        assert_eq!(b.qubit_a, 1.0);
        assert!(b.modes.iter().all(|m| m.1 == 0.0));
        assert_eq!(
            b.modes.iter().map(|m| m.0).collect::<Vec<_>>(),
            [-2, -1, 0, 1, 2]
        );

        let mut occ = vec![0; 7];
        occ[0] = 1;
        occ[3] = 1;
        let two = basis_state(&model.space, &occ).unwrap();
        let b = leakage_breakdown(&two).unwrap();
        assert_eq!((b.qubit_a, b.residual, b.modes[2].1), (1.0, 1.0, 1.0));

        let sched =
            PulseSchedule::standard(Protocol::Satd, PI / 2.0, 30e-9, params.peak_coupling).unwrap();
        let res =
            evolve_subspace(&rho0, &model, &sched, &IntegratorConfig::default(), None).unwrap();
        let b = leakage_breakdown(&res.final_state).unwrap();
        let n_total = crate::hilbert::expectation(
            &res.final_state,
            &crate::hilbert::total_excitation(&model.space),
        )
        .unwrap()
        .re;
        assert_abs_diff_eq!(
            b.qubit_a + b.qubit_b + b.total_mode_population(),
            n_total,
            epsilon = 1e-12
        );
        assert!(b.vacuum > 0.0 && (b.vacuum + n_total - 1.0).abs() < 1e-9);
        // short SATD transfer: adjacent modes dominate the center mode
        let center = b.modes[2].1;
        assert!(b.modes[1].1 > center && b.modes[3].1 > center, "{b:?}");
        let enc = b.encode();
        assert!(
            enc.starts_with("m-2:")
                && enc.contains(";m+0:")
                && enc.ends_with(&format!("vac:{:.6e}", b.vacuum))
        );
    }

    #[test]
    fn indirect_gate_examples() {
        assert_eq!(indirect_gate_error(0.0, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            indirect_gate_error(1e-3, 5e-3).unwrap(),
            1.1e-2,
            epsilon = 1e-17
        );
        assert_eq!(indirect_gate_error(0.0, 0.2).unwrap(), 0.4);
        assert!(indirect_gate_error(-0.1, 0.0).is_err());
    }
}
