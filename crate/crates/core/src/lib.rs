//! Out-of-time-ordered correlators for the ANNNI chain and the LMG model,
//! and the finite-size / dynamical scaling analysis built on them.

pub mod engine;
pub mod error;
pub mod linalg;
pub mod models;
pub mod otoc;
pub mod scaling;

pub use engine::{
    eigendecompose, eigendecompose_matrix, expectation, gibbs_state, gibbs_state_with,
    heisenberg_operator, krylov_propagate, krylov_propagate_with, propagate, DirectSource,
    GibbsOptions, KrylovOptions, QuantumState, SpectralData, SpectralSource,
};
pub use error::{Error, Result};
pub use models::{
    build_annni_hamiltonian, build_hamiltonian, build_lmg_full_basis_hamiltonian,
    build_lmg_hamiltonian, build_operator, build_operator_in_basis, collective_spin_matrices,
    Axis, Basis, Boundary, DenseBudget, HamiltonianMatrix, ModelSpec, OperatorMatrix,
    OperatorSpec,
};
pub use otoc::{
    compute_otoc_series, normalized_series, otoc_values, squared_commutator_series, OtocSeries,
    RealSeries, SeriesMeta, TimeGrid,
};

pub use faer::c64;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
