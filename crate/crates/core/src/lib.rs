//! Exact and certified-numeric machinery for self-affine measures: digit
//! expansions, Fourier transforms with rigorous truncation bounds, Hadamard
//! triple verification, spectrum construction, and frame-bound certification.

#![forbid(unsafe_code)]

pub mod digits;
pub mod error;
pub mod fourier;
pub mod frames;
pub mod hadamard;
pub mod lattice;
pub mod linalg;
pub mod spectra;

pub use error::{Error, Result};
pub use lattice::{IntMatrix, IntVector};
