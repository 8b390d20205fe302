//! Adversarial initialization toolkit: permutation attacks on freshly
//! initialized network weights, the closed-form statistics that predict their
//! effect, Monte Carlo estimators to verify those predictions, a small
//! deterministic training engine to demonstrate them, and statistical
//! detectors plus shuffle remediation to defend against them.
//!
//! The crate is `no_std` (with `alloc`); all floating-point math goes through
//! [`libm`] so results are bit-identical across platforms. IO, file formats
//! and the command-line front end live in the companion `malinit` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod attack;
pub mod data;
pub mod detect;
pub mod error;
pub mod exp;
pub mod init;
pub mod knockout;
pub mod math;
pub mod montecarlo;
pub mod nn;
pub mod rng;
pub mod stats;
pub mod tensor;

pub use error::{Error, Result};
pub use rng::Rng;
pub use tensor::WeightTensor;
