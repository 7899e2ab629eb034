//! Spectral Stokes and Navier-Stokes machinery on a periodized cylinder
//! `{|x_h| < 1} x [0, L)` with Navier-type (vorticity) boundary conditions
//! `curl u x n = 0`, `u . n = 0`.
//!
//! Fields are stored as radial nodal profiles per angular/axial Fourier mode
//! ([`field::SpectralField`]). Every operator acts mode by mode through
//! small dense matrices ([`disk`]), which keeps the resolvent, projection,
//! semigroup and fractional-power layers exact functions of those matrices.

pub mod bessel;
pub mod calculus;
pub mod disk;
pub mod eigenfields;
pub mod elliptic;
pub mod error;
pub mod field;
pub mod fit;
pub mod fractional;
pub mod grid;
pub mod helmholtz;
pub mod io;
pub mod linalg;
pub mod mild;
pub mod norms;
pub mod resolvent;
pub mod rng;
pub mod sampling;
pub mod semigroup;

pub use error::{Error, Result};
pub use field::{FieldKind, PhysicalField, SpectralField};
pub use grid::{Parity, SpectralGrid};
pub use linalg::C64;
