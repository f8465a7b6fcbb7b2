//! Numerical laboratory for the first eigenpair of the radial p-Laplacian on
//! the exterior of the unit ball and for the resonant forced problem.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod cutoff;
pub mod eigensolver;
pub mod error;
pub mod numerics;
pub mod params;
pub mod quadform;
pub mod radial;
pub mod variational;
pub mod weights;

pub use error::{Error, Result};
pub use params::{Params, Regime};

/// Version of the numerics crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
