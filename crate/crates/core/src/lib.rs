//! Magic classes of qudit states via the quantum convolution.
//!
//! States live on `n` qudits of prime local dimension `d` (qubits or odd
//! primes). The crate provides Weyl operators and characteristic functions
//! ([`operators`]), phase-space linear algebra ([`phase_space`]), Clifford
//! circuits and canonical forms ([`clifford`]), the convolution and its
//! iteration ([`convolution`]), and the mean-state classifiers ([`magic`]).

pub mod clifford;
pub mod convolution;
pub mod error;
pub mod io;
pub mod magic;
pub mod operators;
pub mod phase_space;
pub mod states;
pub mod verify;

pub use error::{Error, Result};
pub use magic::{classify, same_cg_class, ClassifyOptions, MagicClassReport};
pub use operators::{CharFunction, DensityOperator};
pub use phase_space::{Dims, IsotropicSubgroup, PhasePoint};
