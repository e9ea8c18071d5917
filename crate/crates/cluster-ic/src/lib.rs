//! Simulation and decoding toolkit for quantum information stored in
//! decohered cluster states.
//!
//! The crate is organized in layers:
//!
//! - [`gf2`], [`pauli`], [`stab`]: bit-packed symplectic algebra and a
//!   stabilizer-tableau simulator, the scalable backend.
//! - [`dense`]: exact state-vector / density-operator simulation for small
//!   systems; the brute-force oracle for everything else and the only
//!   backend for non-Clifford channels.
//! - [`lattice`], [`channels`]: 1D chains and 2D Lieb cylinders with their
//!   cluster states, symmetry charges and logical operators; the
//!   decoherence channels in Kraus and purified form.
//! - [`protocol`]: the communication protocol (entangle ancilla, apply
//!   channel, measure bulk symmetry charges, optionally measure the
//!   environment) and its coherent-information estimators.
//! - [`decoder`], [`statmech`]: maximum-likelihood and minimum-weight
//!   matching decoders, plus the random-bond Ising machinery behind the
//!   threshold analysis.
//! - [`strange`], [`virtualchan`]: strange correlators and the
//!   virtual-channel (foliated) picture, used as independent estimators.
//! - [`config`], [`report`]: experiment configuration and reproducible
//!   output artifacts for the CLI.

pub mod channels;
pub mod config;
pub mod decoder;
pub mod dense;
mod error;
pub mod gf2;
pub mod lattice;
pub mod pauli;
pub mod protocol;
pub mod report;
pub mod selftest;
pub mod stab;
pub mod statmech;
pub mod strange;
pub mod virtualchan;

pub use error::Error;

// Keep the README's code examples compiling.
#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
struct ReadmeDoctests;

/// Binary entropy in bits; `h2(0) = h2(1) = 0`.
pub fn h2(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}
