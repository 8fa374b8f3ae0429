//! Simulation core for a one-way QKD link that encodes on phase inside
//! Faraday-mirror Michelson interferometers and decodes by measuring
//! polarization.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line and anything touching the filesystem live in the `fmqkd` companion
//! crate.
//!
//! Layering, bottom-up:
//!
//! * [`jones`]: Jones vectors and matrices, the Faraday-mirror round trip,
//!   polarization classification.
//! * [`interferometer`]: Alice's and Bob's interferometers, the quantum
//!   channel and the two measurement heads.
//! * [`photon`]: attenuated source and gated detectors, voltage scans and
//!   extinction drift runs.
//! * [`protocol`]: BB84 and B92 sessions, sifting, QBER and a toy
//!   intercept-resend adversary.

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod interferometer;
pub mod jones;
pub mod photon;
pub mod protocol;
pub mod rng;
pub mod system;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use system::SystemConfig;
