//! Relative and mean motions of classical-model multi-machine power systems.
//!
//! Each machine is a second-order swing equation coupled through a reduced
//! network. Around an operating point the Jacobian has `m - 1` oscillatory
//! conjugate pairs (relative motions) and two real eigenvalues `{0, -c}`
//! (mean motion). Under uniform damping `D_i / 2H_i = c` the mean motion has
//! no influence on the relative motions, which this crate checks numerically:
//! structural identities of the Jacobian, eigenvector structure of the modal
//! basis, sampled nonlinear decoupling in modal coordinates, and trajectory
//! experiments that freeze the mean coordinates.
//!
//! Module map:
//!
//! - [`model`]: machine/network parameters, electrical power, vector field, COI view
//! - [`equilibrium`]: Newton solve with a pinned reference angle, equilibrium synthesis,
//!   assumption report
//! - [`linearization`]: coupling matrix `N`, Jacobian forms, finite-difference oracle
//! - [`modal`]: ordered eigendecomposition, `L = R^-1`, modal transform and vector field
//! - [`verify`]: one numerical check per structural lemma and decoupling claim
//! - [`sim`]: fixed-step RK4 in physical and modal coordinates, decoupling experiment,
//!   damping sweep
//! - [`io`] and [`cli`]: case/report/CSV files and the command-line surface

pub mod cases;
pub mod cli;
pub mod equilibrium;
mod error;
pub mod io;
pub mod linearization;
pub mod modal;
pub mod model;
pub mod sim;
pub mod verify;

pub use error::{Error, Result};

pub use equilibrium::{
    check_assumptions, solve_equilibrium, synthesize_equilibrium, AssumptionReport, Equilibrium,
    NewtonSettings,
};
pub use linearization::{
    build_jacobian, build_jacobian_forced, build_n, finite_diff_jacobian, JacobianBundle,
    JacobianForm,
};
pub use modal::{
    eigendecompose, from_modal, modal_vector_field, to_modal, ModalBasis, ModalTolerances,
};
pub use model::{
    coi_view, electrical_power, validate_case, vector_field, CoiView, MachineParams, NetworkParams,
    StateVec, SystemCase, ValidationReport,
};
pub use sim::{
    damping_sweep, decoupling_experiment, integrate, integrate_modal, DecouplingReport,
    Disturbance, MeanMode, ModalTrajectory, Trajectory,
};
pub use verify::{run_verification, CheckResult, VerificationReport, VerifyConfig};

/// Complex scalar used for modal quantities.
pub type C64 = nalgebra::Complex<f64>;
