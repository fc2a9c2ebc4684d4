//! Predefined-time terminal sliding mode (PTSM) control.
//!
//! Sliding surfaces, control laws, plant models (an uncertain
//! second-order chain and an Euler-Lagrange manipulator), a fixed-step
//! closed-loop simulator, and the experiment harness behind the `ptsm` CLI.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controllers;
pub mod error;
pub mod experiments;
pub mod ode;
pub mod plants;
pub mod sim;
pub mod surfaces;
pub mod tbg;
pub mod validate;
pub mod vecops;

pub use error::{Error, Result};
