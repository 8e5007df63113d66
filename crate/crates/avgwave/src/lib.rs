//! Numerical laboratory for the averaged Schrodinger evolution in a weak
//! random potential: ensemble spectral solves of the regularized equation, a
//! Feynman-Kac path representation of the averaged wave function, and the
//! closed-form limit built on the renormalized self-intersection local time
//! of Brownian motion, cross-validated against each other in dimensions one
//! and two.

pub mod covariance;
pub mod duhamel;
pub mod ensemble;
pub mod error;
pub mod paths;
pub mod pde;
pub mod profile;
pub mod quad;
pub mod report;
pub mod representation;

pub use covariance::SchoenbergMeasure;
pub use error::{Error, Result};
