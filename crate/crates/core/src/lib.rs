//! Adaptive reduced-rank multiuser receivers with joint preprocessing,
//! decimation and filtering adapted under a minimum symbol-error-rate
//! criterion, together with full-rank baselines, a time-varying MIMO channel
//! simulator and a reproducible Monte Carlo harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail these checks

pub mod adapt;
pub mod baselines;
pub mod channel;
pub mod error;
pub mod harness;
pub mod jpdf;
pub mod linalg;
pub mod metrics;
pub mod receiver;
pub mod seeding;
pub mod signal;

pub use error::{Error, Result};
