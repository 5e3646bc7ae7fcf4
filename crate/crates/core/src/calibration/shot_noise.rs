use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_non_negative, Error, Result};
use crate::gaussian::VACUUM_VARIANCE;
use crate::rng::{Role, StreamSeed};

/// A balanced detector whose vacuum output variance (in raw integrated
/// units) is `shot_slope · P + electronic_variance` at LO power `P` (mW).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BalancedDetector {
    /// Raw variance per mW of LO power.
    pub shot_slope: f64,
    /// Raw variance with the LO blocked.
    pub electronic_variance: f64,
    /// LO power used for the key-generation runs, mW.
    pub operating_power: f64,
}

impl BalancedDetector {
    /// A detector whose electronic noise is `clearance` times the shot noise
    /// at `operating_power`.
    pub fn with_clearance(shot_slope: f64, clearance: f64, operating_power: f64) -> Result<Self> {
        let d = Self {
            shot_slope,
            electronic_variance: clearance * shot_slope * operating_power,
            operating_power,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.shot_slope.is_finite() && self.shot_slope > 0.0) {
            return Err(Error::invalid("shot_slope", "must be > 0"));
        }
        check_non_negative("electronic_variance", self.electronic_variance)?;
        if !(self.operating_power.is_finite() && self.operating_power > 0.0) {
            return Err(Error::invalid("operating_power", "must be > 0"));
        }
        Ok(())
    }

    pub fn vacuum_variance(&self, lo_power: f64) -> f64 {
        self.shot_slope * lo_power + self.electronic_variance
    }

    pub fn clearance(&self) -> f64 {
        self.electronic_variance / (self.shot_slope * self.operating_power)
    }

    /// Raw variance corresponding to one shot-noise unit at the operating
    /// power, divided by the vacuum variance 1/4.
    pub fn true_snu(&self) -> f64 {
        self.vacuum_variance(self.operating_power) / VACUUM_VARIANCE
    }

    /// Converts a quadrature in shot-noise units to raw detector units.
    pub fn to_raw(&self, x: f64) -> f64 {
        x * self.true_snu().sqrt()
    }
}

impl Default for BalancedDetector {
    fn default() -> Self {
        Self::with_clearance(1.0, 0.037, 0.25).expect("valid default")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub lo_power: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotNoiseFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_std_error: f64,
    pub intercept_std_error: f64,
    pub r_squared: f64,
    pub operating_power: f64,
    /// Fitted vacuum variance at the operating power divided by 1/4.
    pub snu: f64,
    /// intercept / (slope · operating_power)
    pub clearance: f64,
    pub points: Vec<ScanPoint>,
}

impl ShotNoiseFit {
    pub fn validate(&self) -> Result<()> {
        if !(self.slope > 0.0) {
            return Err(Error::invalid("slope", format!("{} must be > 0", self.slope)));
        }
        if !(self.snu > 0.0 && self.snu.is_finite()) {
            return Err(Error::invalid("snu", format!("{} must be > 0", self.snu)));
        }
        Ok(())
    }
}

/// Measures the vacuum variance at each LO power and fits a straight line.
///
/// The fit is weighted least squares with weights from the sampling
/// variance of a variance estimate, `2v²/(n-1)`, iterated on the model.
pub fn shot_noise_scan<R: Rng + ?Sized>(
    lo_powers: &[f64],
    n_pulses_each: usize,
    detector: &BalancedDetector,
    rng: &mut R,
) -> Result<ShotNoiseFit> {
    detector.validate()?;
    if lo_powers.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::invalid("lo_powers", "powers must be finite and >= 0"));
    }
    let mut distinct = lo_powers.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::invalid("lo_powers", "need at least 3 distinct powers"));
    }
    if n_pulses_each < 2 {
        return Err(Error::invalid("n_pulses_each", "need at least 2 pulses per power"));
    }
    let root = StreamSeed(rng.random());
    let points: Vec<ScanPoint> = lo_powers
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let mut r = root.stream(Role::Calibration, i as u64);
            let shot = (detector.shot_slope * p).sqrt();
            let ele = detector.electronic_variance.sqrt();
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..n_pulses_each {
                let z1: f64 = r.sample(StandardNormal);
                let z2: f64 = r.sample(StandardNormal);
                let v = shot * z1 + ele * z2;
                sum += v;
                sum_sq += v * v;
            }
            let n = n_pulses_each as f64;
            let variance = (sum_sq - sum * sum / n) / (n - 1.0);
            ScanPoint { lo_power: p, variance }
        })
        .collect();
    fit_points(points, n_pulses_each, detector.operating_power)
}

fn fit_points(points: Vec<ScanPoint>, n: usize, operating_power: f64) -> Result<ShotNoiseFit> {
    let dof = (n - 1) as f64;
    let weight = |v: f64| dof / (2.0 * v * v).max(f64::MIN_POSITIVE);
    let mut weights: Vec<f64> = points.iter().map(|pt| weight(pt.variance)).collect();
    let mut line = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..4 {
        line = weighted_line(&points, &weights);
        let (slope, intercept, _, _) = line;
        weights = points
            .iter()
            .map(|pt| {
                let model = slope * pt.lo_power + intercept;
                weight(if model > 0.0 { model } else { pt.variance })
            })
            .collect();
    }
    let (slope, intercept, slope_var, intercept_var) = line;
    let wsum: f64 = weights.iter().sum();
    let mean = points.iter().zip(&weights).map(|(p, w)| w * p.variance).sum::<f64>() / wsum;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for (p, w) in points.iter().zip(&weights) {
        ss_res += w * (p.variance - slope * p.lo_power - intercept).powi(2);
        ss_tot += w * (p.variance - mean).powi(2);
    }
    let fit = ShotNoiseFit {
        slope,
        intercept,
        slope_std_error: slope_var.sqrt(),
        intercept_std_error: intercept_var.sqrt(),
        r_squared: 1.0 - ss_res / ss_tot,
        operating_power,
        snu: (slope * operating_power + intercept) / VACUUM_VARIANCE,
        clearance: intercept / (slope * operating_power),
        points,
    };
    fit.validate()?;
    Ok(fit)
}

/// Returns (slope, intercept, var(slope), var(intercept)).
fn weighted_line(points: &[ScanPoint], weights: &[f64]) -> (f64, f64, f64, f64) {
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (p, &w) in points.iter().zip(weights) {
        s += w;
        sx += w * p.lo_power;
        sy += w * p.variance;
        sxx += w * p.lo_power * p.lo_power;
        sxy += w * p.lo_power * p.variance;
    }
    let det = s * sxx - sx * sx;
    (
        (s * sxy - sx * sy) / det,
        (sxx * sy - sx * sxy) / det,
        s / det,
        sxx / det,
    )
}

/// Scales raw values so that vacuum data has variance 1/4.
pub fn snu_normalize(raw: &[f64], fit: &ShotNoiseFit) -> Result<Vec<f64>> {
    fit.validate()?;
    let scale = fit.snu.sqrt().recip();
    Ok(raw.iter().map(|v| v * scale).collect())
}
