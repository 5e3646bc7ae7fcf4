//! Experiment configuration: one JSON document with a default for every
//! field, optionally overridden by `--set dotted.path=value`.

use dmcv::calibration::{BalancedDetector, PulseShape, PulseTrainSpec};
use dmcv::channel::{distance_to_transmittance, ChannelParams, DetectorParams};
use dmcv::gaussian::CoherentAmplitude;
use dmcv::protocol::ProtocolParams;
use dmcv::security::{AttackModel, Direction, ReconciliationParams};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {reason}")]
    Invalid { path: String, reason: String },
    #[error("reading config: {0}")]
    Io(#[from] std::io::Error),
}

fn invalid(path: &str, reason: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        path: path.to_string(),
        reason: reason.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Evenly spaced grid including both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n)
                .map(|i| self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }

    fn validate(&self, path: &str) -> Result<(), ConfigError> {
        if self.points == 0 {
            return Err(invalid(&format!("{path}.points"), "grid must be non-empty"));
        }
        if !self.start.is_finite() || !self.stop.is_finite() {
            return Err(invalid(path, "grid ends must be finite"));
        }
        Ok(())
    }
}

/// Physical and run parameters for the end-to-end protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub mean_photon_number: f64,
    pub transmittance: f64,
    /// Channel excess noise, shot-noise units.
    pub xi_ch: f64,
    pub eta: f64,
    /// Electronic noise, shot-noise units.
    pub xi_ele: f64,
    pub x0: f64,
    pub n_pulses: usize,
    /// Root seed for every command.
    pub seed: u64,
    pub disclosure_fraction: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        // The detector's 3.7% electronic-to-shot clearance gives ξ_ele = 0.037/4.
        Self {
            mean_photon_number: 1.0,
            transmittance: 0.95,
            xi_ch: 0.01,
            eta: 0.76,
            xi_ele: 0.00925,
            x0: 0.0,
            n_pulses: 81_000,
            seed: 1,
            disclosure_fraction: 0.1,
        }
    }
}

impl ProtocolConfig {
    pub fn to_params(&self, seed: u64) -> dmcv::Result<ProtocolParams> {
        let p = ProtocolParams {
            alpha: CoherentAmplitude::from_mean_photon_number(self.mean_photon_number)?,
            channel: ChannelParams::new(self.transmittance, self.xi_ch)?,
            detector: DetectorParams::new(self.eta, self.xi_ele)?,
            x0: self.x0,
            n_pulses: self.n_pulses,
            seed,
            disclosure_fraction: self.disclosure_fraction,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig2Config {
    pub mean_photon_number: f64,
    pub eta: f64,
    pub x0: f64,
    pub transmittance: Grid,
    /// Distances whose equivalent transmittance is added to the grid.
    pub extra_distances_km: Vec<f64>,
    /// Total excess noise values, shot-noise units.
    pub xis: Vec<f64>,
    pub beta: f64,
    pub loss_db_per_km: f64,
    /// (T, ξ) points where the closed-form I(B:E) is checked by sampling.
    pub mc_points: Vec<[f64; 2]>,
    pub mc_trials: usize,
}

impl Default for Fig2Config {
    fn default() -> Self {
        Self {
            mean_photon_number: 1.0,
            eta: 1.0,
            x0: 0.0,
            transmittance: Grid { start: 0.005, stop: 1.0, points: 200 },
            extra_distances_km: vec![35.0],
            xis: vec![0.005, 0.01, 0.02, 0.05, 0.1, 0.2],
            beta: 0.85,
            loss_db_per_km: dmcv::channel::DEFAULT_LOSS_DB_PER_KM,
            mc_points: vec![[0.1995, 0.005], [0.5, 0.02], [0.9, 0.1]],
            mc_trials: 1_000_000,
        }
    }
}

impl Fig2Config {
    /// Sorted, de-duplicated transmittances including the extra distances.
    pub fn transmittances(&self) -> dmcv::Result<Vec<f64>> {
        let mut ts = self.transmittance.values();
        for &d in &self.extra_distances_km {
            ts.push(distance_to_transmittance(d, self.loss_db_per_km)?);
        }
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        Ok(ts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig3Config {
    pub mean_photon_number: f64,
    pub transmittance: f64,
    pub xi: f64,
    pub n_sifted: usize,
    pub bins: usize,
    pub range: [f64; 2],
}

impl Default for Fig3Config {
    fn default() -> Self {
        Self {
            mean_photon_number: 1.0,
            transmittance: 0.9,
            xi: 0.02,
            n_sifted: 100_000,
            bins: 100,
            range: [-2.5, 2.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig4Config {
    pub mean_photon_numbers: Vec<f64>,
    pub transmittance: f64,
    pub xi: f64,
    pub eta: f64,
    pub x0: Grid,
    /// Sifted samples per mean photon number, re-thresholded at every x0.
    pub mc_sifted: usize,
}

impl Default for Fig4Config {
    fn default() -> Self {
        Self {
            mean_photon_numbers: vec![0.5, 1.0, 2.0],
            transmittance: 0.9,
            xi: 0.02,
            eta: 1.0,
            x0: Grid { start: 0.0, stop: 2.0, points: 41 },
            mc_sifted: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostprocessConfig {
    pub block_len: usize,
    /// Shortest trailing block that gets its own code; shorter tails are dropped.
    pub min_tail_len: usize,
    pub col_weight: usize,
    pub row_weight: usize,
    pub max_iters: usize,
    pub epsilon_margin: f64,
    /// Estimated QBER above which the run aborts before reconciliation.
    pub qber_abort: f64,
    /// Toeplitz tag length used to confirm each reconciled block.
    pub verification_bits: usize,
}

impl Default for PostprocessConfig {
    fn default() -> Self {
        Self {
            block_len: 4096,
            min_tail_len: 256,
            col_weight: 3,
            row_weight: 6,
            max_iters: 100,
            epsilon_margin: dmcv::postprocess::DEFAULT_EPSILON_MARGIN,
            qber_abort: 0.11,
            verification_bits: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub pulse: PulseTrainSpec,
    pub detector: BalancedDetector,
    /// LO powers for the scan, mW.
    pub lo_powers: Vec<f64>,
    pub n_pulses_each: usize,
    /// Pulses in the synthesised acquisition.
    pub trace_pulses: usize,
    /// Digitiser noise per window as a fraction of one shot-noise standard deviation.
    pub digitiser_noise: f64,
    /// Write the binary trace and its sidecar.
    pub write_trace: bool,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            pulse: PulseTrainSpec {
                pulse_shape: PulseShape::Rectangular,
                ..Default::default()
            },
            detector: BalancedDetector::default(),
            lo_powers: vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5],
            n_pulses_each: 81_000,
            trace_pulses: 81_000,
            digitiser_noise: 0.01,
            write_trace: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub format: OutputFormat,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            format: OutputFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub protocol: ProtocolConfig,
    pub recon: ReconciliationParams,
    pub attack: AttackModel,
    pub fig2: Fig2Config,
    pub fig3: Fig3Config,
    pub fig4: Fig4Config,
    pub postprocess: PostprocessConfig,
    pub calibration: CalibrationConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            protocol: ProtocolConfig::default(),
            recon: ReconciliationParams {
                beta: 0.95,
                direction: Direction::Reverse,
            },
            attack: AttackModel::default(),
            fig2: Fig2Config::default(),
            fig3: Fig3Config::default(),
            fig4: Fig4Config::default(),
            postprocess: PostprocessConfig::default(),
            calibration: CalibrationConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

fn wrap(path: &str) -> impl Fn(dmcv::Error) -> ConfigError + '_ {
    move |e| invalid(path, e)
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let value: Value = serde_json::from_str(text).map_err(|e| invalid("<config>", e))?;
        Self::from_value(value)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn from_value(value: Value) -> Result<Self, ConfigError> {
        serde_json::from_value(value).map_err(|e| invalid("<config>", e))
    }

    /// Applies `dotted.path=value`. The value is parsed as JSON when it
    /// parses, else taken as a string.
    pub fn set(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (path, raw) = assignment
            .split_once('=')
            .ok_or_else(|| invalid(assignment, "expected dotted.path=value"))?;
        let new: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut root = serde_json::to_value(&*self).expect("config serialises");
        let mut slot = &mut root;
        for key in path.split('.') {
            slot = slot
                .as_object_mut()
                .and_then(|o| o.get_mut(key))
                .ok_or_else(|| invalid(path, "no such field"))?;
        }
        *slot = new;
        *self = serde_json::from_value(root).map_err(|e| invalid(path, e))?;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.protocol.to_params(self.protocol.seed).map_err(wrap("protocol"))?;
        self.recon.validate().map_err(wrap("recon"))?;
        self.attack.validate().map_err(wrap("attack"))?;

        let f2 = &self.fig2;
        f2.transmittance.validate("fig2.transmittance")?;
        if f2.xis.is_empty() {
            return Err(invalid("fig2.xis", "must be non-empty"));
        }
        if f2.xis.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(invalid("fig2.xis", "values must be >= 0"));
        }
        let ts = f2.transmittances().map_err(wrap("fig2.extra_distances_km"))?;
        if ts.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(invalid("fig2.transmittance", "values must lie in [0, 1]"));
        }
        ReconciliationParams { beta: f2.beta, direction: self.recon.direction }
            .validate()
            .map_err(wrap("fig2.beta"))?;
        for (i, [t, xi]) in f2.mc_points.iter().enumerate() {
            ChannelParams::new(*t, *xi).map_err(wrap(&format!("fig2.mc_points[{i}]")))?;
        }
        DetectorParams::new(f2.eta, 0.0).map_err(wrap("fig2.eta"))?;
        CoherentAmplitude::from_mean_photon_number(f2.mean_photon_number).map_err(wrap("fig2.mean_photon_number"))?;

        let f3 = &self.fig3;
        ChannelParams::new(f3.transmittance, f3.xi).map_err(wrap("fig3"))?;
        CoherentAmplitude::from_mean_photon_number(f3.mean_photon_number).map_err(wrap("fig3.mean_photon_number"))?;
        if f3.n_sifted < 2 {
            return Err(invalid("fig3.n_sifted", "need at least 2 samples"));
        }
        if f3.bins == 0 {
            return Err(invalid("fig3.bins", "must be > 0"));
        }
        if !(f3.range[0] < f3.range[1]) {
            return Err(invalid("fig3.range", "lower edge must be below upper edge"));
        }

        let f4 = &self.fig4;
        f4.x0.validate("fig4.x0")?;
        if f4.x0.values().iter().any(|x| *x < 0.0) {
            return Err(invalid("fig4.x0", "thresholds must be >= 0"));
        }
        if f4.mean_photon_numbers.is_empty() {
            return Err(invalid("fig4.mean_photon_numbers", "must be non-empty"));
        }
        for n in &f4.mean_photon_numbers {
            CoherentAmplitude::from_mean_photon_number(*n).map_err(wrap("fig4.mean_photon_numbers"))?;
        }
        ChannelParams::new(f4.transmittance, f4.xi).map_err(wrap("fig4"))?;
        DetectorParams::new(f4.eta, 0.0).map_err(wrap("fig4.eta"))?;
        if f4.mc_sifted < 2 {
            return Err(invalid("fig4.mc_sifted", "need at least 2 samples"));
        }

        let pp = &self.postprocess;
        if pp.block_len < 2 || pp.block_len % 2 != 0 {
            return Err(invalid("postprocess.block_len", "must be even and >= 2"));
        }
        if pp.col_weight != 3 || pp.row_weight != 6 {
            return Err(invalid("postprocess", "only the (3,6)-regular code is supported"));
        }
        if !(pp.qber_abort > 0.0 && pp.qber_abort < 0.5) {
            return Err(invalid("postprocess.qber_abort", "must lie in (0, 0.5)"));
        }
        if pp.verification_bits == 0 {
            return Err(invalid("postprocess.verification_bits", "must be > 0"));
        }
        if pp.max_iters == 0 {
            return Err(invalid("postprocess.max_iters", "must be > 0"));
        }

        let cal = &self.calibration;
        cal.pulse.validate().map_err(wrap("calibration.pulse"))?;
        cal.detector.validate().map_err(wrap("calibration.detector"))?;
        if cal.trace_pulses == 0 {
            return Err(invalid("calibration.trace_pulses", "must be > 0"));
        }
        if !(cal.digitiser_noise.is_finite() && cal.digitiser_noise >= 0.0) {
            return Err(invalid("calibration.digitiser_noise", "must be >= 0"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialisation, leaving out the
    /// `output` section so that results do not depend on where they land.
    pub fn sha256(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serialises");
        value.as_object_mut().expect("object").remove("output");
        let json = serde_json::to_string(&value).expect("config serialises");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}
