//! Geodesic flow on `SL(n)` with the Hilbert-Schmidt metric.
//!
//! The crate covers the extrinsic geometry of `SL(n)` in `M(n)`, adaptive
//! integration of geodesics and Jacobi fields with invariant monitoring,
//! the explicit linear and exponential geodesic families, and the reduced
//! dynamics of block-diagonal geodesics.

pub mod blockdiag;
pub mod error;
pub mod families;
pub mod geometry;
pub mod integrate;
pub mod io;
pub mod linalg;
pub mod random;

pub use error::{GeoError, Result};
pub use linalg::{GroupPoint, SquareMatrix};
