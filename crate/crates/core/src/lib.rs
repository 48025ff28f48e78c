//! Lindblad simulation of STIRAP and SATD state transfer and Bell-state
//! generation between two qubits coupled through a multimode interconnect.

// `!(x > 0.0)` style checks are deliberate: they reject NaN. Coefficient
// tables keep their reference digits.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod analysis;
pub mod error;
pub mod hilbert;
pub mod lindblad;
pub mod model;
pub mod pulses;
pub mod sweeps;

pub use analysis::{
    fidelity_error, initial_state, leakage_breakdown, LeakageBreakdown, TargetKind, TargetState,
};
pub use error::{Error, Result};
pub use hilbert::{CompositeSpace, DensityMatrix, OperatorMatrix, C64};
pub use lindblad::{evolve, evolve_subspace, Diagnostics, EvolutionResult, IntegratorConfig};
pub use model::{LindbladModel, ModelParams, SignRule};
pub use pulses::{AngleProfile, ProfileKind, Protocol, PulseSchedule};
pub use sweeps::{figure_recipe, run_convergence, run_sweep, GridPoint, RunRecord, SweepSpec};
