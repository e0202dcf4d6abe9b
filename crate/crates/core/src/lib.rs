//! Finite-frequency tomography of the acoustic nonlinearity coefficient.
//!
//! Projection data are synthesized by marching the paraxial one-way envelope
//! equation across the domain ([`paraxial`]); images are recovered by ramp
//! filtering and the exact discrete adjoint of that march ([`inversion`]).
//! [`beam`] and [`westervelt`] numerically check the Riccati/Jacobi and
//! second-linearization machinery behind the method.

pub mod beam;
pub mod error;
pub mod grid;
pub mod inversion;
pub mod io;
pub mod paraxial;
pub mod phantom;
pub mod westervelt;

pub use error::{Error, Result};
pub use grid::{ComplexField, Grid2D, RealField};
pub use paraxial::{Sinogram, WaveParams};
