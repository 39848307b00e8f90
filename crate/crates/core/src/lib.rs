//! Unitary network models on periodic lattice truncations.
//!
//! This crate builds and analyzes discrete-time unitary dynamics on
//! `C^{d'} ⊗ l²((Z/LZ)^d)`: symmetric quantum walks in any dimension,
//! Blatter-Browne (BB) five-diagonal matrices, doubly infinite CMV matrices
//! parametrized by Verblunski coefficients, and the Chalker-Coddington
//! network model in both its scalar form on `l²(Z²)` and its coined
//! quantum-walk form.
//!
//! Beyond the model builders, the crate provides
//!
//! - executable unitary equivalences between the models, each returning a
//!   numerical residual ([`equivalence`]);
//! - band structures of translation-invariant symbols on the torus, with
//!   crossing/critical-point detection and certification of spectral
//!   windows where all band velocities are bounded away from zero
//!   ([`fibered`]);
//! - a discretized conjugate operator and the commutator positivity check
//!   it satisfies on certified windows ([`mourre`]);
//! - truncation diagnostics: dense unitary eigendecomposition, time
//!   evolution, spreading exponents and spectral-measure estimates
//!   ([`spectra`]).
//!
//! Grid eigensolves and size sweeps run in parallel through rayon when the
//! `parallel` feature (default) is enabled; every parallel code path has a
//! sequential twin selected by [`par::Parallelism`], and outputs are
//! deterministic either way.

pub mod arcs;
pub mod equivalence;
pub mod error;
pub mod fibered;
pub mod lattice;
pub mod linalg;
pub mod models;
pub mod mourre;
pub mod par;
pub mod spectra;

pub use error::{Error, Result};
pub use linalg::C64;
