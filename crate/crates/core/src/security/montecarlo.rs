use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::gaussian::{CoherentAmplitude, VACUUM_VARIANCE};
use crate::protocol::postselect;
use crate::rng::SimRng;

/// A sampled estimate with its asymptotic standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub trials: usize,
    pub accepted: usize,
}

/// Plug-in estimate of the Bob–Eve mutual information over Bob-conclusive
/// events, sampling Alice's bit, Bob's homodyne outcome and Eve's homodyne
/// outcome directly.
///
/// The standard error is the delta-method one, `sqrt(Var[log2 p(b,e)/p(b)p(e)]/N)`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_mutual_info_be(
    alpha: CoherentAmplitude,
    t: f64,
    eta: f64,
    xi: f64,
    x0: f64,
    eve_noise: f64,
    trials: usize,
    rng: &mut SimRng,
) -> McEstimate {
    let mu_b = (t * eta).sqrt() * alpha.modulus();
    let sigma_b = (VACUUM_VARIANCE + xi).sqrt();
    let mu_e = (1.0 - t).max(0.0).sqrt() * alpha.modulus();
    let sigma_e = (VACUUM_VARIANCE + eve_noise).sqrt();

    let mut counts = [[0usize; 2]; 2];
    for _ in 0..trials {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let zb: f64 = rng.sample(StandardNormal);
        let ze: f64 = rng.sample(StandardNormal);
        let Some(b) = postselect(sign * mu_b + sigma_b * zb, x0).bit() else {
            continue;
        };
        let e = (sign * mu_e + sigma_e * ze > 0.0) as usize;
        counts[b as usize][e] += 1;
    }

    let n: usize = counts.iter().flatten().sum();
    if n == 0 {
        return McEstimate {
            value: 0.0,
            std_error: 0.0,
            trials,
            accepted: 0,
        };
    }
    let nf = n as f64;
    let p = counts.map(|row| row.map(|c| c as f64 / nf));
    let rows = [p[0][0] + p[0][1], p[1][0] + p[1][1]];
    let cols = [p[0][0] + p[1][0], p[0][1] + p[1][1]];
    let (mut m1, mut m2) = (0.0, 0.0);
    for b in 0..2 {
        for e in 0..2 {
            if p[b][e] > 0.0 {
                let l = (p[b][e] / (rows[b] * cols[e])).log2();
                m1 += p[b][e] * l;
                m2 += p[b][e] * l * l;
            }
        }
    }
    McEstimate {
        value: m1.max(0.0),
        std_error: ((m2 - m1 * m1).max(0.0) / nf).sqrt(),
        trials,
        accepted: n,
    }
}
