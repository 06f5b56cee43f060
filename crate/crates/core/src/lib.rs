//! Prandtl-ansatz boundary layers for 2D incompressible viscous MHD near a
//! perfectly conducting wall: inner ideal flows, layer profiles, the
//! assembled approximation, its remainders, a reference viscous solver, and
//! the ε-sweep study.

pub mod error;
pub mod fields;

pub use error::{Error, Result};
pub mod inner0;
pub(crate) mod potential;
pub mod bl0;
pub(crate) mod layer;
pub mod inner1;
pub mod cutoff;
pub(crate) mod jet;
pub mod assembler;
pub mod bl1;
pub mod viscous;
pub mod diagnostics;
pub mod study;
