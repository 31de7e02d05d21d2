//! Numerical toolkit for the two-receiver degraded Gaussian broadcast
//! channel: exact capacity-region geometry, finite-blocklength converse
//! constants, Monte Carlo verification of the Gaussian Poincare variance
//! bound for codebook mixtures, and a superposition-coding simulator.
//!
//! All rates are in nats per channel use. All stochastic routines consume
//! counter-based random streams, so results are bit-identical regardless
//! of thread count.

pub mod capacity;
pub mod channel;
pub mod fbl;
pub mod poincare;
pub mod rng;
pub mod simulator;
pub mod stats;

mod error;

pub use error::{Error, Result};
