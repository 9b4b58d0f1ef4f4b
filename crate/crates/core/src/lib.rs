//! Adaptive non-uniform sampling of bandlimited signals.
//!
//! The crate couples a variable-bias, variable-threshold integrate-and-fire
//! time encoder with the classical iterative sinc-operator reconstruction.
//! Bias and threshold are driven by the signal and derivative energies
//! accumulated since the last firing, so every inter-firing gap satisfies a
//! local, energy-based convergence condition and may exceed the Nyquist
//! interval where the signal varies slowly.

// NaN-rejecting checks are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod encoder;
pub mod error;
pub mod experiment;
pub mod io;
pub mod quad;
pub mod reconstruction;
pub mod signal;
pub mod special;
pub mod svg;

pub use error::{Error, Result};
