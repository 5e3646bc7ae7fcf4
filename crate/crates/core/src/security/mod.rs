//! Mutual informations and secret key rates under the beam-splitter attack.
//!
//! Eve replaces the lossy channel by a splitter of the same transmittance,
//! keeps the reflected mode `|sqrt(1-T)·α⟩`, waits for the basis
//! announcement and homodynes the announced quadrature. She guesses bit 1
//! for a positive outcome and 0 otherwise.
//!
//! Given Alice's symbol, Bob's and Eve's outcomes are independent Gaussians,
//! so the joint distribution of (Alice bit, Bob verdict, Eve guess) is a
//! product of erfc terms and every information below is exact.

mod montecarlo;
mod sweep;

use serde::{Deserialize, Serialize};

use crate::error::{check_non_negative, check_range, Error, Result};
use crate::gaussian::{CoherentAmplitude, VACUUM_VARIANCE};
use crate::protocol::{homodyne_terms, HomodyneTerms, ProtocolParams};
use crate::special::{binary_entropy, erfc, mutual_information};

pub use montecarlo::{estimate_mutual_info_be, McEstimate};
pub use sweep::{sweep_key_rate, sweep_threshold, KeyRateRow, ThresholdRow};

/// Fraction of pulses surviving basis sifting.
pub const SIFT_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Direct,
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconciliationParams {
    /// Reconciliation efficiency β ∈ (0, 1].
    pub beta: f64,
    pub direction: Direction,
}

impl ReconciliationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::invalid("recon.beta", format!("{} outside (0, 1]", self.beta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    BeamSplitter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackModel {
    pub kind: AttackKind,
    /// Variance added to Eve's homodyne, shot-noise units. Zero is the
    /// strongest Eve.
    pub eve_noise: f64,
}

impl Default for AttackModel {
    fn default() -> Self {
        Self {
            kind: AttackKind::BeamSplitter,
            eve_noise: 0.0,
        }
    }
}

impl AttackModel {
    pub fn validate(&self) -> Result<()> {
        check_non_negative("attack.eve_noise", self.eve_noise)
    }
}

/// Informations are in bits per sifted pulse (`i_ab` includes the PSE
/// factor; Eve's terms are conditioned on Bob's conclusive events). Key
/// rates are reported both signed (`*_raw`) and clamped at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport {
    pub i_ab: f64,
    pub i_be: f64,
    pub i_ae: f64,
    pub pse: f64,
    pub qber: f64,
    pub sift_fraction: f64,
    pub beta: f64,
    pub direction: Direction,
    pub k_raw_per_sifted: f64,
    pub k_per_sifted: f64,
    pub k_raw_per_pulse: f64,
    pub k_per_pulse: f64,
}

fn bob_terms(alpha: CoherentAmplitude, t: f64, eta: f64, xi: f64, x0: f64) -> HomodyneTerms {
    homodyne_terms((t * eta).sqrt() * alpha.modulus(), VACUUM_VARIANCE + xi, x0)
}

/// Alice–Bob mutual information per sifted pulse,
/// `(q1+q2)/2 + (q1/2)·log2(q1/(q1+q2)) + (q2/2)·log2(q2/(q1+q2))`.
pub fn mutual_info_ab(alpha: CoherentAmplitude, t: f64, eta: f64, xi: f64, x0: f64) -> f64 {
    let HomodyneTerms { q1, q2 } = bob_terms(alpha, t, eta, xi, x0);
    let total = q1 + q2;
    if total <= 0.0 {
        return 0.0;
    }
    let term = |q: f64| if q > 0.0 { q / 2.0 * (q / total).log2() } else { 0.0 };
    (total / 2.0 + term(q1) + term(q2)).clamp(0.0, 1.0)
}

/// The amplitude Eve keeps, `sqrt(1-T)·α`.
pub fn eve_bs_state(alpha: CoherentAmplitude, t: f64) -> Result<CoherentAmplitude> {
    check_range("transmittance", t, 0.0, 1.0)?;
    Ok(alpha.attenuate(1.0 - t))
}

/// Probability that Eve's sign guess of Alice's bit is wrong.
pub fn eve_guess_error(alpha: CoherentAmplitude, t: f64, eve_noise: f64) -> f64 {
    let amplitude = (1.0 - t).max(0.0).sqrt() * alpha.modulus();
    0.5 * erfc(amplitude / (2.0 * (VACUUM_VARIANCE + eve_noise)).sqrt())
}

/// `I(A:E) = 1 - h2(p_E)`.
pub fn mutual_info_ae(alpha: CoherentAmplitude, t: f64, eve_noise: f64) -> f64 {
    (1.0 - binary_entropy(eve_guess_error(alpha, t, eve_noise))).clamp(0.0, 1.0)
}

/// Joint distribution of (Bob bit, Eve guess) over Bob-conclusive events,
/// normalised. Index 0 is bit 0.
pub fn bob_eve_joint(
    alpha: CoherentAmplitude,
    t: f64,
    eta: f64,
    xi: f64,
    x0: f64,
    eve_noise: f64,
) -> [[f64; 2]; 2] {
    let bob = bob_terms(alpha, t, eta, xi, x0);
    let p_e = eve_guess_error(alpha, t, eve_noise);
    let mut joint = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let p_b = if a == b { bob.p_correct() } else { bob.p_wrong() };
            for e in 0..2 {
                let p_eve = if a == e { 1.0 - p_e } else { p_e };
                joint[b][e] += 0.5 * p_b * p_eve;
            }
        }
    }
    let total: f64 = joint.iter().flatten().sum();
    if total > 0.0 {
        joint.iter_mut().flatten().for_each(|p| *p /= total);
    }
    joint
}

/// `I(B:E)` conditioned on Bob-conclusive events.
pub fn mutual_info_be(alpha: CoherentAmplitude, t: f64, eta: f64, xi: f64, x0: f64, eve_noise: f64) -> f64 {
    mutual_information(&bob_eve_joint(alpha, t, eta, xi, x0, eve_noise)).clamp(0.0, 1.0)
}

/// `k = β·I(A:B) - I(B:E)` (reverse) or `β·I(A:B) - I(A:E)` (direct) per
/// sifted pulse, and the same times the sifting fraction per pulse.
pub fn secret_key_rate(
    params: &ProtocolParams,
    recon: ReconciliationParams,
    attack: AttackModel,
) -> Result<KeyRateReport> {
    params.channel.validate()?;
    params.detector.validate()?;
    recon.validate()?;
    attack.validate()?;
    let alpha = params.alpha;
    let t = params.channel.transmittance;
    let eta = params.detector.eta;
    let xi = params.excess_noise();
    let x0 = params.x0;
    let terms = bob_terms(alpha, t, eta, xi, x0);
    let i_ab = mutual_info_ab(alpha, t, eta, xi, x0);
    let i_be = mutual_info_be(alpha, t, eta, xi, x0, attack.eve_noise);
    let i_ae = mutual_info_ae(alpha, t, attack.eve_noise);
    let leak = match recon.direction {
        Direction::Reverse => i_be,
        Direction::Direct => i_ae,
    };
    let k = recon.beta * i_ab - leak;
    Ok(KeyRateReport {
        i_ab,
        i_be,
        i_ae,
        pse: terms.pse(),
        qber: terms.qber(),
        sift_fraction: SIFT_FRACTION,
        beta: recon.beta,
        direction: recon.direction,
        k_raw_per_sifted: k,
        k_per_sifted: k.max(0.0),
        k_raw_per_pulse: SIFT_FRACTION * k,
        k_per_pulse: SIFT_FRACTION * k.max(0.0),
    })
}
