//! Radio imaging over distributed MIMO arrays.
//!
//! Echo synthesis through a non-isotropic near-field channel, range-migration
//! imaging on virtual full arrays, and sparse Bayesian reconstruction of voxel
//! scenes observed from several radio units.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod rma;
pub mod rng;
pub mod sbl;
pub mod units;
pub mod waveform;

pub use error::{Error, Result};
