//! Simulation and analysis of a four-phase discrete-modulated
//! continuous-variable QKD protocol.
//!
//! The crate is organised bottom-up:
//!
//! * [`gaussian`] and [`channel`] hold the shot-noise-unit covariance algebra
//!   and the lossy, noisy channel model.
//! * [`protocol`] runs the prepare/measure/sift/post-select Monte Carlo and
//!   provides the matching closed-form PSE and QBER.
//! * [`security`] computes mutual informations and secret key rates under the
//!   beam-splitter attack.
//! * [`postprocess`] is the classical tail: parameter estimation, LDPC
//!   syndrome reconciliation and Toeplitz privacy amplification.
//! * [`calibration`] synthesises balanced-homodyne traces and fits the
//!   shot-noise unit.
//!
//! All variances are in shot-noise units with vacuum variance 1/4.

pub mod calibration;
pub mod channel;
mod error;
pub mod gaussian;
pub mod postprocess;
pub mod protocol;
pub mod rng;
pub mod security;
pub mod special;

pub use error::{Error, Result};
