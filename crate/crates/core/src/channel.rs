//! Lossy, noisy channel and imperfect homodyne detector.
//!
//! Excess noise `xi_ch` is referred to Bob's input: it is added after the
//! channel loss and is not itself scaled by `T`.

use serde::{Deserialize, Serialize};

use crate::error::{check_non_negative, check_range, Error, Result};
use crate::gaussian::{ensemble_covariance, CoherentAmplitude, CovMatrix2, VACUUM_VARIANCE};

/// Default fibre-equivalent attenuation used for distance axes.
pub const DEFAULT_LOSS_DB_PER_KM: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Power transmittance `T`.
    pub transmittance: f64,
    /// Excess channel noise, shot-noise units.
    pub xi_ch: f64,
}

impl ChannelParams {
    pub fn new(transmittance: f64, xi_ch: f64) -> Result<Self> {
        let ch = Self { transmittance, xi_ch };
        ch.validate()?;
        Ok(ch)
    }

    pub fn lossless() -> Self {
        Self {
            transmittance: 1.0,
            xi_ch: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_range("channel.transmittance", self.transmittance, 0.0, 1.0)?;
        check_non_negative("channel.xi_ch", self.xi_ch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    /// Detection efficiency `η`.
    pub eta: f64,
    /// Electronic noise, shot-noise units.
    pub xi_ele: f64,
}

impl DetectorParams {
    pub fn new(eta: f64, xi_ele: f64) -> Result<Self> {
        let det = Self { eta, xi_ele };
        det.validate()?;
        Ok(det)
    }

    pub fn ideal() -> Self {
        Self { eta: 1.0, xi_ele: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        check_range("detector.eta", self.eta, 0.0, 1.0)?;
        check_non_negative("detector.xi_ele", self.xi_ele)
    }
}

/// Covariance after a channel: the modulated part (above vacuum) scales by
/// `T`, the vacuum floor stays, and `xi_ch` is added.
pub fn propagate_covariance(v: CovMatrix2, ch: ChannelParams) -> Result<CovMatrix2> {
    ch.validate()?;
    let t = ch.transmittance;
    Ok(CovMatrix2 {
        qq: t * (v.qq - VACUUM_VARIANCE) + VACUUM_VARIANCE + ch.xi_ch,
        pp: t * (v.pp - VACUUM_VARIANCE) + VACUUM_VARIANCE + ch.xi_ch,
        qp: t * v.qp,
    })
}

/// Bob's single-mode covariance after channel and detector, the detector
/// acting as a second splitter of transmittance `η` plus `xi_ele`.
pub fn bob_covariance(alpha: CoherentAmplitude, ch: ChannelParams, det: DetectorParams) -> Result<CovMatrix2> {
    det.validate()?;
    let after_channel = propagate_covariance(ensemble_covariance(alpha), ch)?;
    // η only acts on the modulation; channel noise is already at Bob's input
    let modulated = ch.transmittance * det.eta * alpha.mean_photon_number() / 2.0;
    let noise = after_channel.qq - ch.transmittance * alpha.mean_photon_number() / 2.0;
    Ok(CovMatrix2::diagonal(modulated + noise + det.xi_ele))
}

/// Joint covariance of Alice's modulation data and Bob's measured data,
/// ordered `(q_A, p_A, q_B, p_B)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointCovarianceAb(pub [[f64; 4]; 4]);

impl JointCovarianceAb {
    pub fn alice_block(&self) -> [[f64; 2]; 2] {
        [[self.0[0][0], self.0[0][1]], [self.0[1][0], self.0[1][1]]]
    }

    pub fn bob_block(&self) -> [[f64; 2]; 2] {
        [[self.0[2][2], self.0[2][3]], [self.0[3][2], self.0[3][3]]]
    }

    pub fn cross_block(&self) -> [[f64; 2]; 2] {
        [[self.0[0][2], self.0[0][3]], [self.0[1][2], self.0[1][3]]]
    }
}

/// Alice/Bob data covariance: `V_mod·I` for Alice, `(Tη·V_mod + 1/4 + ξ_ch +
/// ξ_ele)·I` for Bob, and `V_mod·I` off the diagonal, with `V_mod = |α|²/2`.
pub fn joint_covariance_ab(
    alpha: CoherentAmplitude,
    ch: ChannelParams,
    det: DetectorParams,
) -> Result<JointCovarianceAb> {
    let v_mod = alpha.mean_photon_number() / 2.0;
    let bob = bob_covariance(alpha, ch, det)?.qq;
    let mut m = [[0.0; 4]; 4];
    for k in 0..2 {
        m[k][k] = v_mod;
        m[k + 2][k + 2] = bob;
        m[k][k + 2] = v_mod;
        m[k + 2][k] = v_mod;
    }
    Ok(JointCovarianceAb(m))
}

/// Total excess noise `ξ = ξ_ch + ξ_ele` at Bob.
pub fn total_excess_noise(ch: ChannelParams, det: DetectorParams) -> f64 {
    ch.xi_ch + det.xi_ele
}

/// `T = 10^(-loss·d/10)`.
pub fn distance_to_transmittance(d_km: f64, loss_db_per_km: f64) -> Result<f64> {
    check_non_negative("distance_km", d_km)?;
    if !(loss_db_per_km.is_finite() && loss_db_per_km > 0.0) {
        return Err(Error::invalid("loss_db_per_km", format!("{loss_db_per_km} must be > 0")));
    }
    Ok(10f64.powf(-loss_db_per_km * d_km / 10.0))
}

/// Inverse of [`distance_to_transmittance`]; `T = 0` maps to infinity.
pub fn transmittance_to_distance(t: f64, loss_db_per_km: f64) -> Result<f64> {
    check_range("transmittance", t, 0.0, 1.0)?;
    if !(loss_db_per_km.is_finite() && loss_db_per_km > 0.0) {
        return Err(Error::invalid("loss_db_per_km", format!("{loss_db_per_km} must be > 0")));
    }
    Ok(-10.0 * t.log10() / loss_db_per_km)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{bs_joint_transform, environment_variance};
    use proptest::prelude::*;

    fn alpha(a: f64) -> CoherentAmplitude {
        CoherentAmplitude::from_mean_photon_number(a * a).unwrap()
    }

    #[test]
    fn propagate_examples() {
        let ch = ChannelParams::new(0.9, 0.02).unwrap();
        let v = propagate_covariance(CovMatrix2::diagonal(0.75), ch).unwrap();
        assert!((v.qq - 0.72).abs() < 1e-12 && (v.pp - 0.72).abs() < 1e-12);
        let v0 = CovMatrix2 { qq: 0.8, pp: 0.6, qp: 0.1 };
        assert_eq!(propagate_covariance(v0, ChannelParams::lossless()).unwrap(), v0);
    }

    #[test]
    fn propagate_matches_beam_splitter_signal_block() {
        for (t, xi) in [(0.9, 0.02), (0.5, 0.1), (0.1995, 0.005)] {
            let ch = ChannelParams::new(t, xi).unwrap();
            let v = propagate_covariance(CovMatrix2::diagonal(0.75), ch).unwrap();
            let bs = bs_joint_transform(0.75, environment_variance(t, xi), t).unwrap();
            assert!((v.qq - bs.signal().qq).abs() < 1e-12);
        }
    }

    #[test]
    fn joint_covariance_examples() {
        let m = joint_covariance_ab(alpha(1.0), ChannelParams::lossless(), DetectorParams::ideal()).unwrap();
        assert_eq!(m.alice_block(), [[0.5, 0.0], [0.0, 0.5]]);
        assert_eq!(m.bob_block(), [[0.75, 0.0], [0.0, 0.75]]);
        assert_eq!(m.cross_block(), [[0.5, 0.0], [0.0, 0.5]]);

        let m = joint_covariance_ab(
            alpha(1.0),
            ChannelParams::new(0.9, 0.02).unwrap(),
            DetectorParams::ideal(),
        )
        .unwrap();
        assert!((m.bob_block()[0][0] - 0.72).abs() < 1e-12);

        // 0.95·0.76·0.5 + 0.25 + 0.02 + 0.01
        let m = joint_covariance_ab(
            alpha(1.0),
            ChannelParams::new(0.95, 0.02).unwrap(),
            DetectorParams::new(0.76, 0.01).unwrap(),
        )
        .unwrap();
        assert!((m.bob_block()[0][0] - 0.641).abs() < 1e-12);
        assert!((m.bob_block()[1][1] - 0.641).abs() < 1e-12);
    }

    #[test]
    fn excess_noise_sum() {
        let det = |x| DetectorParams::new(1.0, x).unwrap();
        let ch = |x| ChannelParams::new(1.0, x).unwrap();
        assert_eq!(total_excess_noise(ch(0.02), det(0.0)), 0.02);
        assert_eq!(total_excess_noise(ch(0.0), det(0.0)), 0.0);
        assert!((total_excess_noise(ch(0.01), det(0.0092)) - 0.0192).abs() < 1e-15);
    }

    #[test]
    fn distance_examples() {
        assert_eq!(distance_to_transmittance(0.0, 0.2).unwrap(), 1.0);
        assert!((distance_to_transmittance(15.0, 0.2).unwrap() - 0.501187).abs() < 1e-6);
        assert!((distance_to_transmittance(35.0, 0.2).unwrap() - 0.199526).abs() < 1e-6);
        assert!(distance_to_transmittance(-1.0, 0.2).is_err());
        assert!(distance_to_transmittance(1.0, 0.0).is_err());
        let t = distance_to_transmittance(35.0, 0.2).unwrap();
        assert!((transmittance_to_distance(t, 0.2).unwrap() - 35.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(ChannelParams::new(1.1, 0.0).is_err());
        assert!(ChannelParams::new(0.5, -0.01).is_err());
        assert!(DetectorParams::new(-0.1, 0.0).is_err());
        assert!(DetectorParams::new(0.5, f64::NAN).is_err());
        let bad = ChannelParams { transmittance: 2.0, xi_ch: 0.0 };
        assert!(propagate_covariance(CovMatrix2::diagonal(0.5), bad).is_err());
    }

    proptest! {
        #[test]
        fn channel_composition_law(
            t1 in 0.0f64..=1.0, t2 in 0.0f64..=1.0,
            x1 in 0.0f64..0.5, x2 in 0.0f64..0.5,
            qq in 0.25f64..5.0, pp in 0.25f64..5.0, qp in -0.2f64..0.2,
        ) {
            let v = CovMatrix2 { qq, pp, qp };
            let c1 = ChannelParams::new(t1, x1).unwrap();
            let c2 = ChannelParams::new(t2, x2).unwrap();
            let seq = propagate_covariance(propagate_covariance(v, c1).unwrap(), c2).unwrap();
            let one = propagate_covariance(v, ChannelParams::new(t1 * t2, t2 * x1 + x2).unwrap()).unwrap();
            prop_assert!((seq.qq - one.qq).abs() < 1e-12);
            prop_assert!((seq.pp - one.pp).abs() < 1e-12);
            prop_assert!((seq.qp - one.qp).abs() < 1e-12);
        }

        #[test]
        fn output_stays_physical(
            t in 0.0f64..=1.0, xi in 0.0f64..1.0,
            qq in 0.25f64..5.0, pp in 0.25f64..5.0, r in -0.9f64..0.9,
        ) {
            let qp = r * ((qq * pp - 1.0 / 16.0).max(0.0)).sqrt();
            let v = CovMatrix2 { qq, pp, qp };
            prop_assume!(v.is_physical());
            let out = propagate_covariance(v, ChannelParams::new(t, xi).unwrap()).unwrap();
            prop_assert!(out.is_physical());
        }

        #[test]
        fn transmittance_strictly_decreasing(d in 0.0f64..200.0, step in 0.01f64..10.0) {
            let a = distance_to_transmittance(d, 0.2).unwrap();
            let b = distance_to_transmittance(d + step, 0.2).unwrap();
            prop_assert!(b < a);
        }
    }
}
