//! Numerics for the semilinear heat equation with an inverse-square
//! potential on radial domains:
//!
//! * closed-form Hardy constants and admissibility checks ([`params`]),
//! * weighted piecewise-linear forms in the ground-state variable
//!   ([`mesh`], [`forms`]),
//! * principal eigenpairs and spectra ([`eigen`]),
//! * equilibria, bifurcation branches and linearized stability
//!   ([`equilibrium`]),
//! * annulus approximations ([`excision`]),
//! * the energy-stable gradient semiflow ([`semiflow`]),
//! * the transition `mu -> mu*` ([`mu_limit`]).

pub mod bessel;
pub mod eigen;
pub mod equilibrium;
pub mod error;
pub mod excision;
pub mod forms;
pub mod mesh;
pub mod mu_limit;
pub mod parallel;
pub mod params;
pub mod quadrature;
pub mod semiflow;
pub mod tridiag;

pub use equilibrium::{
    check_uniqueness, galerkin_amplitude, linearized_smallest_eigenvalue, solve_equilibrium,
    solve_equilibrium_with, trace_branch, trace_branch_with, Branch, BranchOptions, BranchPoint,
    Equilibrium, NewtonOptions, UniquenessReport,
};
pub use error::{Error, Result};
pub use excision::{
    excision_sweep, hmu_distance, solve_annulus_eigen, solve_annulus_equilibrium, zero_extend,
    ExcisionRow, ExcisionSweep,
};
pub use forms::{
    assemble, assemble_with, ground_state_exponent, AssemblyOptions, DiscreteForms,
    GroundStateWeight, MassMatrix, NormReport, Substitution,
};
pub use eigen::{
    mu_sweep, principal_eigenpair, principal_eigenpair_with, spectrum, EigenOptions, EigenPair,
    Spectrum, SweepRow,
};
pub use mesh::{build_mesh, Grading, MeshSpec, RadialMesh};
pub use params::{DomainGeometry, ProblemParams, ValidationReport, Violation};
pub use tridiag::SymTridiag;
pub use semiflow::{
    decay_rate, evolve, gronwall_envelope, omega_limit, sign_invariance_check, step, DecayReport,
    EnergyRecord, EquilibriumSet, InitialData, OmegaClassification, OmegaLabel, OmegaOptions,
    SignClass, SignReport, Stepper, Trajectory, TrajectoryState,
};
pub use mu_limit::{
    branch_mu_sweep, h10_blowup_probe, mu_limit_study, LambdaSchedule, MuLimitRow, MuLimitTable,
};
