//! Canonical solutions, connection matrices and confluence of non-resonant
//! fuchsian linear difference systems `δ₋ₕY = A(x)Y`.

pub mod connection;
pub mod diffsystem;
pub mod error;
pub mod factseries;
pub mod io;
pub mod jet;
pub mod linalg;
pub mod poly;
pub mod rational;
pub mod spectral;
pub mod specfun;

pub use error::{Error, Result};
pub use linalg::ComplexMatrix;
