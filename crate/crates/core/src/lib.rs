//! Pseudo-spectral Landau-Lifshitz-Gilbert dynamics on the periodic box, its
//! moving-frame reduction to a covariant complex Ginzburg-Landau system, and
//! the diagnostics that check the identities and a priori bounds of that
//! reduction numerically.

pub mod cgl;
pub mod error;
pub mod field;
pub mod frame;
pub mod grid;
pub mod llg;
pub mod norms;
pub mod scenario;
pub mod spectral;
pub mod vec3;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use field::{ComplexField, ScalarField, VectorField3};
pub use grid::GridSpec;
pub use spectral::Spectral;
