//! Simulation of non-Abelian anyonic interferometry on a single triangular
//! plaquette of the S3 quantum double model.
//!
//! The crate is organised in three layers that are checked against each other:
//!
//! * [`plaquette`]: the abstract model with three 6-level edge qudits,
//!   built on the S3 group tools in [`group`] and the dense state vectors in
//!   [`hilbert`].
//! * [`encoding`]: every qudit written as a qubit plus a qutrit, with gate
//!   sequences of qutrit permutations and two-level CNOTs.
//! * [`optics`]: single photons in dual-rail and tri-rail modes, with beam
//!   splitters, SPDC sources, post-selected CNOTs and post-selection.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`). The aliases
//! at the crate root fix the scalar to `f64`, which is what the tolerances
//! quoted throughout the documentation assume.

pub mod encoding;
pub mod error;
pub mod group;
pub mod hilbert;
pub mod optics;
pub mod plaquette;
pub mod scalar;

pub use error::{Error, Result};
pub use group::{GroupElement, Irrep, RepRef, Side};
pub use scalar::Real;

/// Double-precision state vector over a qudit register.
pub type StateVector = hilbert::StateVector<f64>;
/// Double-precision operator acting on a subset of register sites.
pub type LocalOperator = hilbert::LocalOperator<f64>;
/// Double-precision dense complex matrix.
pub type CMatrix = scalar::CMatrix<f64>;
/// Double-precision sparse Fock-space vector.
pub type FockVector = optics::FockVector<f64>;
/// Double-precision complex scalar.
pub type Complex = num_complex::Complex<f64>;

/// Single-precision state vector.
pub type StateVectorF32 = hilbert::StateVector<f32>;
/// Single-precision sparse Fock-space vector.
pub type FockVectorF32 = optics::FockVector<f32>;
