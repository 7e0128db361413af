//! Numerical laboratory for divergence-form block systems on periodic grids:
//! discrete operators, a contour-based holomorphic calculus, half-space norm
//! functionals, explicit boundary value solvers and measurement probes.

pub mod analysis;
pub mod calculus;
pub mod error;
pub mod fft;
pub mod io;
pub mod linalg;
pub mod operators;
pub mod probes;
pub mod solvers;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
