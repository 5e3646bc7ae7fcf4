use std::fs::File;
use std::io::{BufRead, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Role, StreamSeed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseShape {
    Rectangular,
    /// Gaussian with FWHM equal to the pulse width, integrated over twice
    /// the pulse width.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PulseTrainSpec {
    /// Pulse repetition rate, Hz.
    pub rep_rate: f64,
    /// Pulse width (FWHM for Gaussian pulses), s.
    pub pulse_width: f64,
    /// Digitiser sample rate, Hz.
    pub sample_rate: f64,
    pub pulse_shape: PulseShape,
    /// Detector gain, trace units per quadrature unit.
    pub gain: f64,
}

impl Default for PulseTrainSpec {
    fn default() -> Self {
        Self {
            rep_rate: 1e6,
            pulse_width: 30e-9,
            sample_rate: 100e6,
            pulse_shape: PulseShape::Rectangular,
            gain: 1.0,
        }
    }
}

impl PulseTrainSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |name, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("{v} must be > 0")))
            }
        };
        positive("rep_rate", self.rep_rate)?;
        positive("pulse_width", self.pulse_width)?;
        positive("sample_rate", self.sample_rate)?;
        positive("gain", self.gain)?;
        if self.pulse_width >= 1.0 / self.rep_rate {
            return Err(Error::invalid("pulse_width", "must be shorter than the pulse period"));
        }
        if self.sample_rate < 10.0 * self.rep_rate {
            return Err(Error::invalid("sample_rate", "must be at least 10× the repetition rate"));
        }
        let ratio = self.sample_rate / self.rep_rate;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(Error::invalid("sample_rate", "must be an integer multiple of rep_rate"));
        }
        if self.window_len() >= self.samples_per_period() {
            return Err(Error::invalid("pulse_width", "integration window leaves no baseline gap"));
        }
        Ok(())
    }

    pub fn samples_per_period(&self) -> usize {
        (self.sample_rate / self.rep_rate).round() as usize
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    /// Samples in one integration window.
    pub fn window_len(&self) -> usize {
        let pulse = (self.pulse_width * self.sample_rate).round().max(1.0) as usize;
        match self.pulse_shape {
            PulseShape::Rectangular => pulse,
            PulseShape::Gaussian => (2 * pulse).max(3),
        }
    }

    /// First sample of the window within each period; the window is centred.
    pub fn window_start(&self) -> usize {
        (self.samples_per_period() - self.window_len()) / 2
    }

    /// Pulse profile over the window, scaled so that `sum(shape)·dt` equals
    /// the pulse width.
    pub fn shape(&self) -> Vec<f64> {
        let len = self.window_len();
        let raw: Vec<f64> = match self.pulse_shape {
            PulseShape::Rectangular => vec![1.0; len],
            PulseShape::Gaussian => {
                let sigma = self.pulse_width / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
                let centre = len as f64 * self.dt() / 2.0;
                (0..len)
                    .map(|i| {
                        let t = (i as f64 + 0.5) * self.dt() - centre;
                        (-t * t / (2.0 * sigma * sigma)).exp()
                    })
                    .collect()
            }
        };
        let area: f64 = raw.iter().sum::<f64>() * self.dt();
        raw.into_iter().map(|v| v * self.pulse_width / area).collect()
    }
}

/// A sampled acquisition.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub samples: Vec<f64>,
}

/// Pulses synthesised or integrated per parallel work item.
const CHUNK_PULSES: usize = 4096;

/// Pulse windows carrying `gain · x · shape` plus white electronic noise of
/// standard deviation `electronic_sigma` on every sample.
///
/// One `u64` is drawn from `rng`; each chunk of pulses then uses its own
/// substream, so the result does not depend on thread scheduling.
pub fn synthesize_trace<R: Rng + ?Sized>(
    quadratures: &[f64],
    spec: &PulseTrainSpec,
    electronic_sigma: f64,
    rng: &mut R,
) -> Result<Trace> {
    spec.validate()?;
    crate::error::check_non_negative("electronic_sigma", electronic_sigma)?;
    let root = StreamSeed(rng.random());
    let period = spec.samples_per_period();
    let start = spec.window_start();
    let shape = spec.shape();
    let mut samples = vec![0.0; period * quadratures.len()];
    samples
        .par_chunks_mut(period * CHUNK_PULSES)
        .zip(quadratures.par_chunks(CHUNK_PULSES))
        .enumerate()
        .for_each(|(chunk, (out, xs))| {
            let mut noise = root.stream(Role::TraceNoise, chunk as u64);
            for (pulse, &x) in out.chunks_exact_mut(period).zip(xs) {
                for (s, &w) in pulse[start..start + shape.len()].iter_mut().zip(&shape) {
                    *s = spec.gain * x * w;
                }
                if electronic_sigma > 0.0 {
                    for s in pulse.iter_mut() {
                        let z: f64 = noise.sample(StandardNormal);
                        *s += electronic_sigma * z;
                    }
                }
            }
        });
    Ok(Trace { samples })
}

/// Baseline-subtracted window areas, one per pulse period. The baseline is
/// the mean of all gap samples in this acquisition.
pub fn integrate_pulses(trace: &Trace, spec: &PulseTrainSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let period = spec.samples_per_period();
    if trace.samples.len() % period != 0 {
        return Err(Error::PartialWindow {
            samples: trace.samples.len(),
            period,
        });
    }
    let start = spec.window_start();
    let len = spec.window_len();
    let per_chunk: Vec<(f64, Vec<f64>)> = trace
        .samples
        .par_chunks(period * CHUNK_PULSES)
        .map(|chunk| {
            let mut gap_sum = 0.0;
            let mut areas = Vec::with_capacity(chunk.len() / period);
            for pulse in chunk.chunks_exact(period) {
                gap_sum += pulse[..start].iter().sum::<f64>() + pulse[start + len..].iter().sum::<f64>();
                areas.push(pulse[start..start + len].iter().sum::<f64>());
            }
            (gap_sum, areas)
        })
        .collect();
    let pulses = trace.samples.len() / period;
    let gap_sum: f64 = per_chunk.iter().map(|(g, _)| g).sum();
    let gap_count = pulses * (period - len);
    let baseline = if gap_count > 0 { gap_sum / gap_count as f64 } else { 0.0 };
    let dt = spec.dt();
    Ok(per_chunk
        .into_iter()
        .flat_map(|(_, areas)| areas)
        .map(|a| (a - baseline * len as f64) * dt)
        .collect())
}

/// Divides window areas by `gain · pulse_width`.
pub fn recover_quadratures(integrals: &[f64], spec: &PulseTrainSpec) -> Vec<f64> {
    let scale = spec.gain * spec.pulse_width;
    integrals.iter().map(|a| a / scale).collect()
}

/// JSON sidecar describing a `.f32` trace file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSidecar {
    pub sample_rate: f64,
    pub rep_rate: f64,
    pub pulse_width: f64,
    pub gain: f64,
    pub pulse_shape: PulseShape,
    pub n_samples: usize,
}

/// Writes `<base>.f32` (little-endian f32 samples) and `<base>.json`.
pub fn write_trace(base: &Path, trace: &Trace, spec: &PulseTrainSpec) -> Result<()> {
    let mut bin = BufWriter::new(File::create(base.with_extension("f32"))?);
    for &s in &trace.samples {
        bin.write_all(&(s as f32).to_le_bytes())?;
    }
    bin.flush()?;
    let sidecar = TraceSidecar {
        sample_rate: spec.sample_rate,
        rep_rate: spec.rep_rate,
        pulse_width: spec.pulse_width,
        gain: spec.gain,
        pulse_shape: spec.pulse_shape,
        n_samples: trace.samples.len(),
    };
    let mut json = serde_json::to_string_pretty(&sidecar)?;
    json.push('\n');
    std::fs::write(base.with_extension("json"), json)?;
    Ok(())
}

pub fn read_trace(base: &Path) -> Result<(Trace, PulseTrainSpec)> {
    let sidecar: TraceSidecar = serde_json::from_slice(&std::fs::read(base.with_extension("json"))?)?;
    let mut bytes = Vec::new();
    File::open(base.with_extension("f32"))?.read_to_end(&mut bytes)?;
    if bytes.len() != 4 * sidecar.n_samples {
        return Err(Error::LengthMismatch {
            expected: 4 * sidecar.n_samples,
            actual: bytes.len(),
        });
    }
    let samples = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let spec = PulseTrainSpec {
        rep_rate: sidecar.rep_rate,
        pulse_width: sidecar.pulse_width,
        sample_rate: sidecar.sample_rate,
        pulse_shape: sidecar.pulse_shape,
        gain: sidecar.gain,
    };
    spec.validate()?;
    Ok((Trace { samples }, spec))
}

/// CSV with header `pulse_index,value`.
pub fn write_integrated_csv<W: Write>(mut out: W, values: &[f64]) -> Result<()> {
    writeln!(out, "pulse_index,value")?;
    for (i, v) in values.iter().enumerate() {
        writeln!(out, "{i},{v}")?;
    }
    Ok(())
}

pub fn read_integrated_csv<R: BufRead>(input: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != "pulse_index,value" {
                return Err(Error::Parse {
                    line: 1,
                    reason: "expected header `pulse_index,value`".into(),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let value = line
            .split(',')
            .nth(1)
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::Parse {
                line: i + 1,
                reason: "bad value".into(),
            })?;
        out.push(value);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> crate::rng::SimRng {
        StreamSeed(3).stream(Role::TraceNoise, 0)
    }

    #[test]
    fn default_spec_is_valid() {
        let spec = PulseTrainSpec::default();
        spec.validate().unwrap();
        assert_eq!(spec.samples_per_period(), 100);
        assert_eq!(spec.window_len(), 3);
    }

    #[test]
    fn invalid_specs_rejected() {
        let base = PulseTrainSpec::default();
        for bad in [
            PulseTrainSpec { pulse_width: 2e-6, ..base },
            PulseTrainSpec { sample_rate: 5e6, ..base },
            PulseTrainSpec { sample_rate: 100.5e6, ..base },
            PulseTrainSpec { gain: 0.0, ..base },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
            assert!(synthesize_trace(&[1.0], &bad, 0.0, &mut rng()).is_err());
        }
    }

    #[test]
    fn silent_trace_is_flat_zero() {
        let trace = synthesize_trace(&[0.0; 50], &PulseTrainSpec::default(), 0.0, &mut rng()).unwrap();
        assert!(trace.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn constant_pulse_integrates_to_width_amplitude_gain() {
        for shape in [PulseShape::Rectangular, PulseShape::Gaussian] {
            let spec = PulseTrainSpec { gain: 2.5, pulse_shape: shape, ..Default::default() };
            let trace = synthesize_trace(&[0.8], &spec, 0.0, &mut rng()).unwrap();
            let area = integrate_pulses(&trace, &spec).unwrap();
            assert!((area[0] - 30e-9 * 0.8 * 2.5).abs() < 1e-20, "{shape:?}");
            assert!((recover_quadratures(&area, &spec)[0] - 0.8).abs() < 1e-12);
        }
    }

    #[test]
    fn synthesis_is_deterministic_per_seed() {
        let spec = PulseTrainSpec::default();
        let xs: Vec<f64> = (0..10_000).map(|i| (i as f64).sin()).collect();
        let a = synthesize_trace(&xs, &spec, 0.1, &mut rng()).unwrap();
        let b = synthesize_trace(&xs, &spec, 0.1, &mut rng()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn one_value_per_window() {
        let spec = PulseTrainSpec { sample_rate: 10e6, ..Default::default() };
        let trace = synthesize_trace(&vec![0.1; 81_000], &spec, 0.01, &mut rng()).unwrap();
        assert_eq!(integrate_pulses(&trace, &spec).unwrap().len(), 81_000);
    }

    #[test]
    fn partial_window_signalled() {
        let spec = PulseTrainSpec::default();
        let trace = Trace { samples: vec![0.0; 150] };
        assert!(matches!(integrate_pulses(&trace, &spec), Err(Error::PartialWindow { .. })));
    }

    #[test]
    fn pure_noise_integrates_to_zero_mean() {
        let spec = PulseTrainSpec::default();
        let n = 20_000;
        let sigma = 0.3;
        let trace = synthesize_trace(&vec![0.0; n], &spec, sigma, &mut rng()).unwrap();
        let v = recover_quadratures(&integrate_pulses(&trace, &spec).unwrap(), &spec);
        let mean = v.iter().sum::<f64>() / n as f64;
        // per-window sd: sigma·sqrt(len)·dt/(gain·width)
        let sd = sigma * (spec.window_len() as f64).sqrt() * spec.dt() / spec.pulse_width;
        assert!(mean.abs() < 3.0 * sd / (n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn integration_is_linear() {
        let spec = PulseTrainSpec::default();
        let t1 = synthesize_trace(&[0.3, -1.0, 2.0], &spec, 0.2, &mut rng()).unwrap();
        let t2 = synthesize_trace(&[1.1, 0.4, -0.7], &spec, 0.5, &mut rng()).unwrap();
        let (a, b) = (1.7, -0.45);
        let combo = Trace {
            samples: t1.samples.iter().zip(&t2.samples).map(|(x, y)| a * x + b * y).collect(),
        };
        let i1 = integrate_pulses(&t1, &spec).unwrap();
        let i2 = integrate_pulses(&t2, &spec).unwrap();
        let ic = integrate_pulses(&combo, &spec).unwrap();
        for k in 0..3 {
            let want = a * i1[k] + b * i2[k];
            assert!((ic[k] - want).abs() <= 1e-12 * (a * i1[k]).abs().max((b * i2[k]).abs()).max(1e-30));
        }
    }

    #[test]
    fn round_trip_preserves_sample_variance() {
        let spec = PulseTrainSpec::default();
        let mut r = rng();
        let n = 10_000;
        let x: Vec<f64> = (0..n).map(|_| 0.5 * r.sample::<f64, _>(StandardNormal)).collect();
        let sigma = 0.5 * spec.pulse_width / (spec.dt() * (spec.window_len() as f64).sqrt()) * 0.05;
        let trace = synthesize_trace(&x, &spec, sigma, &mut r).unwrap();
        let y = recover_quadratures(&integrate_pulses(&trace, &spec).unwrap(), &spec);
        let var = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        };
        assert!((var(&y) / var(&x) - 1.0).abs() < 0.02);
    }

    #[test]
    fn files_round_trip() {
        let dir = std::env::temp_dir().join(format!("dmcv-trace-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let base = dir.join("acq");
        let spec = PulseTrainSpec { pulse_shape: PulseShape::Gaussian, ..Default::default() };
        let trace = synthesize_trace(&[0.5, -0.25, 1.0], &spec, 0.01, &mut rng()).unwrap();
        write_trace(&base, &trace, &spec).unwrap();
        let (back, spec_back) = read_trace(&base).unwrap();
        assert_eq!(spec_back, spec);
        for (a, b) in trace.samples.iter().zip(&back.samples) {
            assert_eq!(*b, *a as f32 as f64);
        }
        let values = integrate_pulses(&back, &spec_back).unwrap();
        let mut csv = Vec::new();
        write_integrated_csv(&mut csv, &values).unwrap();
        assert_eq!(read_integrated_csv(csv.as_slice()).unwrap(), values);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
