//! Scenario-based accuracy assessment and design of abstracted models for
//! stochastic hybrid systems.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only computation:
//!
//! - [`jlss`]: jump linear stochastic systems, scenario sampling and
//!   Euler–Maruyama integration under common random numbers.
//! - [`metrics`]: trajectory distances (sup and directional Hausdorff, with
//!   a hybrid point metric).
//! - [`bounds`]: sample sizes for the scenario approach.
//! - [`convex`]: a dense primal barrier interior-point solver for small
//!   convex programs with PSD and convex-quadratic constraints.
//! - [`scenario`]: constraint removal (greedy, random, block) and the
//!   assessment / design problems built on top of it.
//! - [`bisim`]: the quadratic stochastic bi-simulation function baseline.
//! - [`validate`]: Monte Carlo violation estimates, deviation histograms and
//!   the reach-probability bound.
//!
//! IO, configuration and parallel execution live in the `shsa` crate.

#![no_std]
#![deny(missing_debug_implementations)]
// `!(x > 0.0)` is used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod binomial;
pub mod bisim;
pub mod bounds;
pub mod convex;
mod error;
pub mod exec;
pub mod jlss;
mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod scenario;
pub mod seed;
pub mod validate;

pub use error::{Error, Result};
pub use exec::{Executor, Sequential};

pub use nalgebra::{DMatrix, DVector};
