//! Open-system adiabaticity toolkit.
//!
//! Builds time-dependent Lindblad generators in the Pauli coherence-vector
//! representation, decomposes them into Jordan blocks, evaluates block
//! crossover times, and integrates the master equation both exactly and in
//! the block-decoupled (adiabatic) approximation. The [`dj`] module packages
//! the Deutsch-Jozsa model family used throughout the tests.

pub mod adiabatic;
pub mod dj;
pub mod error;
pub mod evolve;
pub mod models;
pub mod operator;
pub mod par;
pub mod spectral;
pub mod superop;
pub mod theorem;

pub use error::{Error, Result};
pub use operator::{CoherenceVector, OperatorBasis, OperatorMatrix};
pub use superop::{GeneratorFamily, Supermatrix};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type C64 = num_complex::Complex64;
pub type CMatrix = nalgebra::DMatrix<C64>;
pub type CVector = nalgebra::DVector<C64>;
