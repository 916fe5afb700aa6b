//! Simulation and verification lab for compound Hawkes mid-price models.
//!
//! The mid-price is `S_t = S_0 + Σ_{k ≤ N(t)} a(X_k)` where `N` is a
//! (linear, regime-switching or nonlinear) Hawkes process and `X` an ergodic
//! Markov chain of price-change states. The crate provides exact path
//! simulation, closed-form diffusion-limit coefficients, Monte Carlo checks of
//! the law of large numbers and functional CLT, estimation, and a CLI.

// `!(x > 0.0)` is used throughout on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chains;
pub mod cli;
pub mod error;
pub mod estimation;
pub mod exec;
pub mod hawkes;
pub mod io;
pub mod kernels;
pub mod limits;
pub mod mc;
pub mod price;
pub mod quadrature;
pub mod rng;
pub mod stats;

pub use error::{LabError, Result};
