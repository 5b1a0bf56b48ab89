//! Truncated two-species bosonic Fock space over the lattice one-body space:
//! occupation bases, ladder operators, coherent states, and the algebraic
//! checks the many-body layer is built on.

pub mod basis;
pub mod ladder;
pub mod state;

pub use basis::{enumerate_sector_basis, sector_dimension, BasisRegistry, SectorBasis};
pub use ladder::{
    annihilation_matrix, check_ccr, creation_matrix, one_body_operator, smeared_operator,
    CcrResiduals, SmearKind,
};
pub use state::{
    coherent_state, number_expectation, poisson_pmf, random_sector_state, random_truncated_state,
    NumberObservable, OneBodyVector, SectorState, Species, TruncatedFockState,
    DEFAULT_DEFICIT_BOUND,
};
