//! Fourth-order long-stencil finite differences and an energy-stable modified
//! BDF2 scheme for the Cahn-Hilliard equation on a periodic cube, with the
//! verification harness that goes with it.

pub mod error;
pub mod grid;
pub mod krylov;
pub mod scheme;
pub mod spectral;
pub mod stencil;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{Field, FieldStats, Grid3};
