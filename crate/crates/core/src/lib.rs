//! Simulation, estimation and verification of empirical processes for
//! locally stationary time series under the functional dependence measure.

pub mod dependence;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod io;
pub mod limit;
pub mod process;
pub mod quad;
pub mod rates;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
