//! Statistical models for AI reliability data.
//!
//! The crate is `no_std` (it needs `alloc`) and carries no IO. Parsing,
//! file formats, and the command-line front end live in the `airrel` crate.
//!
//! Modules:
//!
//! - [`recurrent`]: recurrent-event NHPPs with exposure adjustment, at unit
//!   and fleet (superposed) level, plus proportional-intensity covariates.
//! - [`propagation`]: multi-module error-propagation point process with an
//!   exponential triggering kernel, and MAE comparison against HPP/NHPP.
//! - [`srgm`]: discrete covariate software-reliability-growth models and
//!   regression-based resilience models with forward stepwise selection.
//! - [`regression`]: linear, GLM, AFT, and Scheffé mixture regressions.
//! - [`design`]: maximin Latin hypercube search and accelerated-life-test
//!   transforms.
//! - [`simulate`]: seeded generators for every model above.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod design;
pub mod error;
pub mod exposure;
pub mod linalg;
pub mod math;
pub mod optim;
pub mod propagation;
pub mod recurrent;
pub mod regression;
pub mod rng;
pub mod simulate;
pub mod srgm;
pub mod stats;

pub use error::{Error, Result};
pub use exposure::ExposureSchedule;
pub use rng::Seed;
