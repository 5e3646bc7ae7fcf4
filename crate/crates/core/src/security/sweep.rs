use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{transmittance_to_distance, ChannelParams, DetectorParams};
use crate::error::{Error, Result};
use crate::gaussian::CoherentAmplitude;
use crate::protocol::{pse_theory, qber_theory, ProtocolParams};

use super::{secret_key_rate, AttackModel, ReconciliationParams};

/// One point of a key-rate curve. Rates are signed so the noise cutoff is
/// visible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateRow {
    pub transmittance: f64,
    pub distance_km: f64,
    pub xi: f64,
    pub i_ab: f64,
    pub i_be: f64,
    pub i_ae: f64,
    pub k_per_sifted: f64,
    pub k_per_pulse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub x0: f64,
    pub mean_photon: f64,
    pub pse: f64,
    pub qber: f64,
}

fn non_empty(name: &'static str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        Err(Error::invalid(name, "grid must not be empty"))
    } else {
        Ok(())
    }
}

/// Key rate over a transmittance × total-excess-noise grid, ξ-major.
///
/// Each ξ is the total noise at Bob and is attributed to the channel; the
/// detector keeps `base.detector.eta` with no separate electronic term.
pub fn sweep_key_rate(
    ts: &[f64],
    xis: &[f64],
    base: &ProtocolParams,
    recon: ReconciliationParams,
    attack: AttackModel,
    loss_db_per_km: f64,
) -> Result<Vec<KeyRateRow>> {
    non_empty("transmittances", ts)?;
    non_empty("xis", xis)?;
    let grid: Vec<(f64, f64)> = xis.iter().flat_map(|&xi| ts.iter().map(move |&t| (xi, t))).collect();
    grid.par_iter()
        .map(|&(xi, t)| {
            let params = ProtocolParams {
                channel: ChannelParams::new(t, xi)?,
                detector: DetectorParams::new(base.detector.eta, 0.0)?,
                ..*base
            };
            let r = secret_key_rate(&params, recon, attack)?;
            Ok(KeyRateRow {
                transmittance: t,
                distance_km: transmittance_to_distance(t, loss_db_per_km)?,
                xi,
                i_ab: r.i_ab,
                i_be: r.i_be,
                i_ae: r.i_ae,
                k_per_sifted: r.k_raw_per_sifted,
                k_per_pulse: r.k_raw_per_pulse,
            })
        })
        .collect()
}

/// Closed-form PSE and QBER over a threshold × mean-photon-number grid,
/// photon-number-major.
pub fn sweep_threshold(x0s: &[f64], photon_numbers: &[f64], base: &ProtocolParams) -> Result<Vec<ThresholdRow>> {
    non_empty("x0s", x0s)?;
    non_empty("photon_numbers", photon_numbers)?;
    let mut rows = Vec::with_capacity(x0s.len() * photon_numbers.len());
    for &n in photon_numbers {
        let alpha = CoherentAmplitude::from_mean_photon_number(n)?;
        for &x0 in x0s {
            if !(x0.is_finite() && x0 >= 0.0) {
                return Err(Error::invalid("x0", format!("{x0} must be >= 0")));
            }
            let p = ProtocolParams { alpha, x0, ..*base };
            rows.push(ThresholdRow {
                x0,
                mean_photon: n,
                pse: pse_theory(&p),
                qber: qber_theory(&p),
            });
        }
    }
    Ok(rows)
}
