//! Separable Gaussian neural networks (SGNN) and their relatives.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`] and [`rng`]: dense row-major matrices, a cyclic Jacobi
//!   symmetric eigensolver and a reproducible PRNG.
//! - [`candidates`]: the ten synthetic benchmark functions and the uniform
//!   dataset sampler.
//! - [`sgnn`], [`grbfnn`], [`mlp`]: the three model families with analytic
//!   forward/backward passes.
//! - [`trainer`]: mini-batch Adam with validation-based early stopping.
//! - [`analysis`]: closed-form parameter/FLOP counts and the weight-space
//!   Hessian projection from GRBFNN onto SGNN weights.
//! - [`io`]: the plain-text model format.
//! - [`verify`]: brute-force and finite-difference checks.
//!
//! All arithmetic is `f64`. Indexing is 0-based everywhere.

// `!(a < b)` is how NaN gets rejected along with the wrong order
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod candidates;
pub mod error;
pub mod grbfnn;
pub mod io;
pub mod linalg;
pub mod mlp;
pub mod rng;
pub mod sgnn;
pub mod trainer;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use rng::Rng;

/// Lower bound applied to every trainable Gaussian width.
pub const SIGMA_MIN: f64 = 1e-3;
