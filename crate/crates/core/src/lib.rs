//! Simulation and estimation toolkit for extremes of threshold-dependent Gaussian
//! random fields: generalized Pickands and Piterbarg constants, exact-asymptotic
//! tail approximations and double-sum bounds.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod covariance;
pub mod doublesum;
pub mod error;
pub mod families;
pub mod functional;
pub mod rng;
pub mod simkit;
pub mod special;
pub mod stats;
pub mod tailprob;

pub use error::{Error, Result};
pub use rng::RngStream;
pub use stats::{Estimate, EstimateMeta};

pub use constants::{ConvergenceStatus, ExtrapolationSchedule, Method};
pub use covariance::{DriftFunction, LimitFieldSpec, ThresholdedFamily, VarianceFunction};
pub use doublesum::{BoundParams, BoxRegion};
pub use functional::FunctionalSpec;
pub use simkit::{GridSpec, SamplePath};
pub use tailprob::{ConditionalSampler, TailEstimate};
