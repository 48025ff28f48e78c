//! Tensor-product Hilbert spaces and dense complex operators.
//!
//! Basis states are ordered lexicographically in the subsystem occupations,
//! with the first subsystem most significant (the usual Kronecker ordering).
//! For the interconnect model the subsystem order is always
//! `qubit a, mode -N, ..., mode +N, qubit b`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubsystemKind {
    Qubit,
    Mode,
}

/// One factor of a composite space: a qubit or an interconnect mode truncated
/// to `dimension` levels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsystemSpec {
    pub label: String,
    pub dimension: usize,
    pub kind: SubsystemKind,
}

impl SubsystemSpec {
    pub fn new(label: impl Into<String>, dimension: usize, kind: SubsystemKind) -> Result<Self> {
        if dimension < 2 {
            return Err(invalid(format!(
                "subsystem dimension must be >= 2, got {dimension}"
            )));
        }
        Ok(Self {
            label: label.into(),
            dimension,
            kind,
        })
    }

    pub fn qubit(label: impl Into<String>, levels: usize) -> Result<Self> {
        Self::new(label, levels, SubsystemKind::Qubit)
    }

    pub fn mode(label: impl Into<String>, levels: usize) -> Result<Self> {
        Self::new(label, levels, SubsystemKind::Mode)
    }
}

#[derive(Debug, PartialEq, Eq)]
struct SpaceLayout {
    subsystems: Vec<SubsystemSpec>,
    strides: Vec<usize>,
    total_dimension: usize,
}

/// Ordered tensor product of subsystems. Cheap to clone; clones share the
/// layout.
#[derive(Clone, Debug)]
pub struct CompositeSpace {
    layout: Arc<SpaceLayout>,
}

impl PartialEq for CompositeSpace {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.layout, &other.layout) || self.layout == other.layout
    }
}

impl Eq for CompositeSpace {}

impl CompositeSpace {
    pub fn new(subsystems: Vec<SubsystemSpec>) -> Result<Self> {
        if subsystems.is_empty() {
            return Err(invalid("composite space needs at least one subsystem"));
        }
        for (i, s) in subsystems.iter().enumerate() {
            if s.dimension < 2 {
                return Err(invalid(format!(
                    "subsystem `{}` has dimension {}",
                    s.label, s.dimension
                )));
            }
            if subsystems[..i].iter().any(|o| o.label == s.label) {
                return Err(invalid(format!("duplicate subsystem label `{}`", s.label)));
            }
        }
        let mut strides = vec![1usize; subsystems.len()];
        for k in (0..subsystems.len() - 1).rev() {
            strides[k] = strides[k + 1] * subsystems[k + 1].dimension;
        }
        let total_dimension = strides[0] * subsystems[0].dimension;
        Ok(Self {
            layout: Arc::new(SpaceLayout {
                subsystems,
                strides,
                total_dimension,
            }),
        })
    }

    /// The interconnect layout: qubit `a`, modes `c-N ..= c+N`, qubit `b`.
    pub fn multimode(side_modes: usize, qubit_levels: usize, mode_levels: usize) -> Result<Self> {
        let n = side_modes as i64;
        let mut subs = Vec::with_capacity(2 * side_modes + 3);
        subs.push(SubsystemSpec::qubit("a", qubit_levels)?);
        for offset in -n..=n {
            subs.push(SubsystemSpec::mode(mode_label(offset), mode_levels)?);
        }
        subs.push(SubsystemSpec::qubit("b", qubit_levels)?);
        Self::new(subs)
    }

    pub fn subsystems(&self) -> &[SubsystemSpec] {
        &self.layout.subsystems
    }

    pub fn len(&self) -> usize {
        self.layout.subsystems.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn total_dimension(&self) -> usize {
        self.layout.total_dimension
    }

    pub fn dimension_of(&self, index: usize) -> Result<usize> {
        self.layout
            .subsystems
            .get(index)
            .map(|s| s.dimension)
            .ok_or(Error::IndexOutOfRange {
                index,
                len: self.len(),
            })
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.layout.subsystems.iter().position(|s| s.label == label)
    }

    /// Flat basis index of a product state.
    pub fn basis_index(&self, occupation: &[usize]) -> Result<usize> {
        if occupation.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: occupation.len(),
            });
        }
        let mut idx = 0;
        for ((&occ, sub), &stride) in occupation
            .iter()
            .zip(self.subsystems())
            .zip(&self.layout.strides)
        {
            if occ >= sub.dimension {
                return Err(invalid(format!(
                    "occupation {occ} out of range for `{}` (dimension {})",
                    sub.label, sub.dimension
                )));
            }
            idx += occ * stride;
        }
        Ok(idx)
    }

    /// Inverse of [`basis_index`](Self::basis_index).
    pub fn occupation(&self, mut index: usize) -> Vec<usize> {
        self.layout
            .strides
            .iter()
            .map(|&stride| {
                let occ = index / stride;
                index %= stride;
                occ
            })
            .collect()
    }

    /// Total number of excitations carried by basis state `index`.
    pub fn excitation_count(&self, index: usize) -> usize {
        self.occupation(index).iter().sum()
    }
}

pub(crate) fn mode_label(offset: i64) -> String {
    if offset > 0 {
        format!("c+{offset}")
    } else {
        format!("c{offset}")
    }
}

/// Lowering operator truncated to `dimension` levels.
pub fn annihilation(dimension: usize) -> Result<DMatrix<C64>> {
    if dimension < 2 {
        return Err(invalid(format!(
            "annihilation needs dimension >= 2, got {dimension}"
        )));
    }
    let mut m = DMatrix::zeros(dimension, dimension);
    for level in 0..dimension - 1 {
        m[(level, level + 1)] = C64::new(((level + 1) as f64).sqrt(), 0.0);
    }
    Ok(m)
}

/// `diag(0, 1, ..., dimension - 1)`.
pub fn number(dimension: usize) -> Result<DMatrix<C64>> {
    if dimension < 2 {
        return Err(invalid(format!(
            "number operator needs dimension >= 2, got {dimension}"
        )));
    }
    Ok(DMatrix::from_fn(dimension, dimension, |i, j| {
        if i == j {
            C64::new(i as f64, 0.0)
        } else {
            ZERO
        }
    }))
}

/// Dense operator on a composite space.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    space: CompositeSpace,
    entries: DMatrix<C64>,
}

impl OperatorMatrix {
    pub fn new(space: CompositeSpace, entries: DMatrix<C64>) -> Result<Self> {
        let d = space.total_dimension();
        if entries.nrows() != d || entries.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: entries.nrows().max(entries.ncols()),
            });
        }
        Ok(Self { space, entries })
    }

    pub fn zeros(space: &CompositeSpace) -> Self {
        let d = space.total_dimension();
        Self {
            space: space.clone(),
            entries: DMatrix::zeros(d, d),
        }
    }

    pub fn identity(space: &CompositeSpace) -> Self {
        let d = space.total_dimension();
        Self {
            space: space.clone(),
            entries: DMatrix::identity(d, d),
        }
    }

    pub fn space(&self) -> &CompositeSpace {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.entries
    }

    pub fn dimension(&self) -> usize {
        self.entries.nrows()
    }

    fn check_space(&self, other: &CompositeSpace) -> Result<()> {
        if &self.space == other {
            Ok(())
        } else {
            Err(Error::SpaceMismatch)
        }
    }

    pub fn compose(&self, rhs: &OperatorMatrix) -> Result<OperatorMatrix> {
        self.check_space(&rhs.space)?;
        Ok(Self {
            space: self.space.clone(),
            entries: &self.entries * &rhs.entries,
        })
    }

    pub fn plus(&self, rhs: &OperatorMatrix) -> Result<OperatorMatrix> {
        self.check_space(&rhs.space)?;
        Ok(Self {
            space: self.space.clone(),
            entries: &self.entries + &rhs.entries,
        })
    }

    pub fn scaled(&self, factor: C64) -> OperatorMatrix {
        Self {
            space: self.space.clone(),
            entries: &self.entries * factor,
        }
    }

    pub fn adjoint(&self) -> OperatorMatrix {
        Self {
            space: self.space.clone(),
            entries: self.entries.adjoint(),
        }
    }

    /// `[self, rhs]`
    pub fn commutator(&self, rhs: &OperatorMatrix) -> Result<OperatorMatrix> {
        self.check_space(&rhs.space)?;
        let entries = &self.entries * &rhs.entries - &rhs.entries * &self.entries;
        Ok(Self {
            space: self.space.clone(),
            entries,
        })
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    /// Largest elementwise modulus.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max |A - A†|` elementwise.
    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.entries)
    }

    pub(crate) fn entries_mut(&mut self) -> &mut DMatrix<C64> {
        &mut self.entries
    }
}

pub(crate) fn hermiticity_error(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `I ⊗ ... ⊗ op ⊗ ... ⊗ I` with `op` acting on subsystem `index`.
pub fn embed(op: &DMatrix<C64>, index: usize, space: &CompositeSpace) -> Result<OperatorMatrix> {
    let d = space.dimension_of(index)?;
    if op.nrows() != d || op.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: op.nrows(),
        });
    }
    let stride = space.layout.strides[index];
    let total = space.total_dimension();
    let block = d * stride;
    let mut out = DMatrix::zeros(total, total);
    for hi in (0..total).step_by(block) {
        for a in 0..d {
            for b in 0..d {
                let v = op[(a, b)];
                if v == ZERO {
                    continue;
                }
                let row0 = hi + a * stride;
                let col0 = hi + b * stride;
                for lo in 0..stride {
                    out[(row0 + lo, col0 + lo)] = v;
                }
            }
        }
    }
    Ok(OperatorMatrix {
        space: space.clone(),
        entries: out,
    })
}

/// Lowering operator of subsystem `index`, embedded in `space`.
pub fn lowering_on(space: &CompositeSpace, index: usize) -> Result<OperatorMatrix> {
    embed(&annihilation(space.dimension_of(index)?)?, index, space)
}

/// Number operator of subsystem `index`, embedded in `space`.
pub fn number_on(space: &CompositeSpace, index: usize) -> Result<OperatorMatrix> {
    embed(&number(space.dimension_of(index)?)?, index, space)
}

/// Sum of every subsystem's number operator.
pub fn total_excitation(space: &CompositeSpace) -> OperatorMatrix {
    let d = space.total_dimension();
    let entries = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            C64::new(space.excitation_count(i) as f64, 0.0)
        } else {
            ZERO
        }
    });
    OperatorMatrix {
        space: space.clone(),
        entries,
    }
}

/// Tolerances a [`DensityMatrix`] must satisfy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateTolerances {
    pub hermiticity: f64,
    pub trace: f64,
    pub min_eigenvalue: f64,
}

impl Default for StateTolerances {
    fn default() -> Self {
        Self {
            hermiticity: 1e-10,
            trace: 1e-8,
            min_eigenvalue: -1e-8,
        }
    }
}

/// Hermitian, unit-trace, positive-semidefinite state of a composite system.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    space: CompositeSpace,
    entries: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validates against [`StateTolerances::default`].
    pub fn new(space: CompositeSpace, entries: DMatrix<C64>) -> Result<Self> {
        Self::with_tolerances(space, entries, StateTolerances::default())
    }

    pub fn with_tolerances(
        space: CompositeSpace,
        entries: DMatrix<C64>,
        tol: StateTolerances,
    ) -> Result<Self> {
        let d = space.total_dimension();
        if entries.nrows() != d || entries.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: entries.nrows().max(entries.ncols()),
            });
        }
        let rho = Self { space, entries };
        rho.check(tol).map_err(invalid)?;
        Ok(rho)
    }

    pub(crate) fn from_raw(space: CompositeSpace, entries: DMatrix<C64>) -> Self {
        debug_assert_eq!(entries.nrows(), space.total_dimension());
        Self { space, entries }
    }

    /// `|psi><psi| / <psi|psi>`
    pub fn from_pure(space: CompositeSpace, psi: &DVector<C64>) -> Result<Self> {
        let d = space.total_dimension();
        if psi.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: psi.len(),
            });
        }
        let norm2 = psi.norm_squared();
        if norm2 == 0.0 || !norm2.is_finite() {
            return Err(invalid("state vector has zero or non-finite norm"));
        }
        let entries = psi * psi.adjoint() / C64::new(norm2, 0.0);
        Ok(Self { space, entries })
    }

    pub fn maximally_mixed(space: CompositeSpace) -> Self {
        let d = space.total_dimension();
        let entries = DMatrix::identity(d, d) / C64::new(d as f64, 0.0);
        Self { space, entries }
    }

    pub fn space(&self) -> &CompositeSpace {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.entries
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    pub fn purity(&self) -> f64 {
        // Tr(ρ²) = Σ_ij ρ_ij ρ_ji
        let n = self.entries.nrows();
        let mut acc = ZERO;
        for i in 0..n {
            for j in 0..n {
                acc += self.entries[(i, j)] * self.entries[(j, i)];
            }
        }
        acc.re
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.entries)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.entries + self.entries.adjoint()) * C64::new(0.5, 0.0);
        herm.symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn population(&self, occupation: &[usize]) -> Result<f64> {
        let i = self.space.basis_index(occupation)?;
        Ok(self.entries[(i, i)].re)
    }

    /// Checks every invariant, returning a description of the first violation.
    pub fn check(&self, tol: StateTolerances) -> std::result::Result<(), String> {
        let herm = self.hermiticity_error();
        if !(herm <= tol.hermiticity) {
            return Err(format!(
                "hermiticity error {herm:.3e} exceeds {:.1e}",
                tol.hermiticity
            ));
        }
        let tr = self.trace();
        if !((tr - ONE).norm() <= tol.trace) {
            return Err(format!(
                "trace {tr} deviates from 1 by more than {:.1e}",
                tol.trace
            ));
        }
        let min_eig = self.min_eigenvalue();
        if !(min_eig >= tol.min_eigenvalue) {
            return Err(format!(
                "minimum eigenvalue {min_eig:.3e} below {:.1e}",
                tol.min_eigenvalue
            ));
        }
        Ok(())
    }
}

/// Pure product state with the given per-subsystem occupations.
pub fn basis_state(space: &CompositeSpace, occupation: &[usize]) -> Result<DensityMatrix> {
    let idx = space.basis_index(occupation)?;
    let d = space.total_dimension();
    let mut entries = DMatrix::zeros(d, d);
    entries[(idx, idx)] = ONE;
    Ok(DensityMatrix {
        space: space.clone(),
        entries,
    })
}

/// `Tr(ρ · op)`
pub fn expectation(rho: &DensityMatrix, op: &OperatorMatrix) -> Result<C64> {
    if rho.space != op.space {
        return Err(Error::SpaceMismatch);
    }
    let n = rho.entries.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..n {
            acc += rho.entries[(i, j)] * op.entries[(j, i)];
        }
    }
    Ok(acc)
}

impl fmt::Display for CompositeSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .subsystems()
            .iter()
            .map(|s| format!("{}[{}]", s.label, s.dimension))
            .collect();
        write!(f, "{}", parts.join(" ⊗ "))
    }
}
