//! Holonomic gates on a four-level tripod system.
//!
//! The crate builds the loop on the Rabi sphere, the dark-state holonomy it produces, the
//! parametric noise and two-qubit coupling that spoil it, and the entanglement and fidelity
//! metrics used to score the result. Every closed-form operator can be checked against the
//! brute-force propagator in [`propagator`].

pub mod coupling;
pub mod error;
pub mod experiment;
pub mod holonomy;
pub mod looppath;
pub mod metrics;
pub mod noise;
pub mod propagator;
pub mod qmath;

pub use error::{Error, Result};
