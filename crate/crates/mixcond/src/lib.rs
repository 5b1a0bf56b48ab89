//! Numerical laboratory for the mean-field dynamics of two-species Bose
//! condensates on a periodic lattice.
//!
//! The crate has three layers:
//!
//! - a spectral integrator for the coupled Hartree system of the two
//!   condensate orbitals ([`hartree`]), on the lattice defined by [`model`];
//! - the truncated two-species bosonic Fock space over the same lattice
//!   ([`fock`]) with exact sector dynamics ([`dynamics`]) and
//!   `(1,1)`-reduced density operators ([`reduced`]);
//! - an experiment harness ([`harness`]) that sweeps particle numbers,
//!   measures the trace-norm distance between the many-body reduced density
//!   and the Hartree projector, and fits the observed convergence rate.
//!
//! Start with the runnable programs in `examples/`; each demonstrates one
//! capability end to end. The `mixcond` binary exposes the same flows as CLI
//! subcommands driven by a JSON configuration file.

// Guards written as `!(x > 0.0)` also reject NaN, which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod fock;
pub mod harness;
pub mod hartree;
pub mod model;
pub mod reduced;

pub use error::{Error, Result};
pub use model::{
    build_laplacian, sample_potential, validate_sequences, CouplingConstants, LatticeModel,
    PotentialKind, PotentialSpec, RunConfig,
};
