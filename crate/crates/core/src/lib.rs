//! Gaussian covariance-matrix laboratory for entropy production after a
//! Klein-Gordon mass quench: forward simulation, mode tomography from phase
//! snapshots, and the Landauer decomposition of subregion entropy changes.

// `!(x > 0.0)` rejects NaN together with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod field;
pub mod gaussian;
pub mod io;
pub mod landauer;
pub mod quench;
pub mod tomography;
pub mod units;

pub use error::{Error, Result};
