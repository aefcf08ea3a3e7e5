//! Finite-dimensional simulation of quantum measurement thermodynamics.
//!
//! The crate is organised bottom-up:
//!
//! - [`operator`]: dense complex operator algebra (density matrices, projector
//!   families, dephasing, unitary evolution, entropy).
//! - [`scheme`]: the four-stage selective measurement on system, apparatus and
//!   pointer.
//! - [`superselection`]: decoherence of a system coupled to an apparatus with a
//!   continuous (discretised) superselection momentum.
//! - [`poisson`]: the enlarged-ensemble description of one non-selective
//!   measurement as a cut-off one-time Poisson process.
//! - [`entropy`]: entropy-transfer bookkeeping and starred observables.
//! - [`work`]: two-energy-measurement work statistics and the Jarzynski
//!   equality with and without event readings.
//! - [`regression`]: least-squares certificates for the mixture-representation
//!   constraint of the infinite regression of measuring systems.
//! - [`landauer`]: the Landauer identity over block-structured memories and the
//!   Klein bound.
//!
//! Natural units are used throughout: `hbar = k_B = 1`, so `k_B T = 1 / beta`.

// Range checks are written `!(x >= 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod entropy;
pub mod error;
pub mod landauer;
pub mod operator;
pub mod poisson;
pub mod random;
pub mod regression;
pub mod scheme;
pub mod seeds;
pub mod superselection;
pub mod work;

pub use error::{Error, Result};
pub use operator::{CMatrix, DensityMatrix, HermitianOperator, ProjectorFamily, StateVector, Superoperator};
