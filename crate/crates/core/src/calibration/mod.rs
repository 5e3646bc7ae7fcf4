//! Synthetic balanced-homodyne acquisition and shot-noise calibration.
//!
//! A trace is a sampled photocurrent difference: each pulse period holds one
//! pulse window whose area is `gain · pulse_width · x` for the quadrature
//! value `x`, on top of white electronic noise. Integrating the windows
//! against a baseline taken from the inter-pulse gaps recovers `x`.

mod shot_noise;
mod trace;

pub use shot_noise::{shot_noise_scan, snu_normalize, BalancedDetector, ShotNoiseFit};
pub use trace::{
    integrate_pulses, read_integrated_csv, read_trace, recover_quadratures, synthesize_trace,
    write_integrated_csv, write_trace, PulseShape, PulseTrainSpec, Trace, TraceSidecar,
};

use rand::Rng;

use crate::error::Result;

/// Sends quadratures (shot-noise units) through the whole acquisition chain:
/// detector scaling, trace synthesis, pulse integration and normalisation
/// with `fit`.
pub fn measure_through_chain<R: Rng + ?Sized>(
    quadratures: &[f64],
    detector: &BalancedDetector,
    spec: &PulseTrainSpec,
    electronic_sigma: f64,
    fit: &ShotNoiseFit,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let raw: Vec<f64> = quadratures.iter().map(|&x| detector.to_raw(x)).collect();
    let trace = synthesize_trace(&raw, spec, electronic_sigma, rng)?;
    let integrals = integrate_pulses(&trace, spec)?;
    snu_normalize(&recover_quadratures(&integrals, spec), fit)
}
