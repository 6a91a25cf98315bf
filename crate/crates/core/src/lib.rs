//! Spectral laboratory for Schrödinger operators on ℤᵈ-periodic graphs.
//!
//! The crate builds finite restrictions of periodic, alloy-type potential (RAP)
//! and alloy-type metric (RAM) operators, computes their integrated density of
//! states (IDS), and provides the numerical machinery used to probe Wegner
//! estimates: Floquet–Bloch band structures, Hellmann–Feynman derivatives,
//! spectral shift functions and Schatten quasi-norms.
//!
//! The crate is `no_std` and only needs `alloc`. Enabling the `parallel`
//! feature evaluates Monte-Carlo samples and Bloch grid points on the rayon
//! thread pool; results are identical either way.
//!
//! Module map:
//!
//! - [`lattice`]: periodic cell graphs, the ℤᵈ action, agglomerates and boxes.
//! - [`random`]: coupling distributions, counter-based sampling, configurations.
//! - [`operators`]: Laplacian, RAP and RAM assembly, the unitary `S` map.
//! - [`spectral`]: eigensolves, counting, Hellmann–Feynman and conformal checks.
//! - [`floquet`]: twisted operators, band structures, Bloch IDS, flat bands.
//! - [`ids`]: finite-volume and expected IDS, exhaustion, jump profiles.
//! - [`ssf`]: spectral shift functions, Krein identity, Schatten calculus.
//! - [`wegner`]: switch functions, Wegner statistics, scaling fits, constants.

#![no_std]

extern crate alloc;
#[cfg(feature = "parallel")]
extern crate std;

mod error;
mod exec;
pub mod floquet;
pub mod ids;
pub mod lattice;
pub mod model;
pub mod operators;
pub mod random;
pub mod spectral;
pub mod ssf;
pub mod stats;
pub mod wegner;

pub use error::{Error, Result};
pub use lattice::{Agglomerate, GroupElement, IndexSet, Lattice, LatticeSpec};
pub use model::Model;
pub use operators::{Hamiltonian, ModelKind};
pub use random::{CouplingDistribution, RandomConfig};
pub use spectral::Spectrum;
