//! Numerical laboratory for suspension semi-flows over the angle-multiplying
//! map `x -> l*x mod 1`.
//!
//! The crate is organised bottom-up:
//!
//! - [`ceiling`]: trigonometric ceiling functions and their class constants.
//! - [`dynamics`]: the semi-flow, symbolic words, inverse branches and cones.
//! - [`transversality`]: cone-overlap weights `m(f,t)`, `n(f,t)` and the
//!   minimum expansion rate.
//! - [`mixing`]: the unstable-slope series, cobounding potential and the
//!   weak-mixing verdict.
//! - [`spectral`]: Ulam discretisation of the transfer operator, its
//!   spectrum, and correlation curves.
//! - [`aniso`]: anisotropic Sobolev norms on a periodic Fourier grid.
//! - [`genericity`]: slope clusters, perturbation families and the bad-set
//!   probe.

pub mod aniso;
pub mod ceiling;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod genericity;
pub mod mixing;
pub mod smooth;
pub mod spectral;
pub mod transversality;

pub use error::{Error, Result};
