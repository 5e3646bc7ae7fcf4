use dmcv::channel::{ChannelParams, DetectorParams};
use dmcv::gaussian::CoherentAmplitude;
use dmcv::protocol::{ProtocolParams, TrialRecord};
use dmcv::special::ks_two_sample;

use super::{collect_sifted, experiment_seed, Command, RunError};
use crate::config::ExperimentConfig;
use crate::output::{Report, Table};

const PHASE_LABELS: [&str; 4] = ["0", "pi/2", "pi", "3pi/2"];

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Homodyne output histograms by relative phase, with Gaussian fits.
pub fn run_fig3(config: &ExperimentConfig) -> Result<Report, RunError> {
    let f = &config.fig3;
    let params = ProtocolParams {
        alpha: CoherentAmplitude::from_mean_photon_number(f.mean_photon_number)?,
        channel: ChannelParams::new(f.transmittance, f.xi)?,
        detector: DetectorParams::ideal(),
        x0: 0.0,
        n_pulses: 1,
        seed: experiment_seed(config, Command::Fig3).0,
        disclosure_fraction: 0.0,
    };
    let (matched, unmatched) = collect_sifted(&params, f.n_sifted)?;
    let mut by_phase: [Vec<f64>; 4] = Default::default();
    for r in matched.iter().chain(&unmatched) {
        by_phase[TrialRecord::relative_quarter_turns(r)].push(r.sample);
    }

    let [lo, hi] = f.range;
    let width = (hi - lo) / f.bins as f64;
    let mut hist = Table::new(
        "fig3_histogram",
        &[
            ("x", "SNU"),
            ("density_phi_0", "1/SNU"),
            ("density_phi_pi_2", "1/SNU"),
            ("density_phi_pi", "1/SNU"),
            ("density_phi_3pi_2", "1/SNU"),
        ],
    );
    let mut counts = vec![[0usize; 4]; f.bins];
    for (k, samples) in by_phase.iter().enumerate() {
        for &x in samples {
            let b = ((x - lo) / width).floor();
            if b >= 0.0 && (b as usize) < f.bins {
                counts[b as usize][k] += 1;
            }
        }
    }
    for (b, c) in counts.iter().enumerate() {
        let mut row = vec![(lo + (b as f64 + 0.5) * width).into()];
        for k in 0..4 {
            row.push((c[k] as f64 / (by_phase[k].len().max(1) as f64 * width)).into());
        }
        hist.push(row);
    }

    let mut fit = Table::new(
        "fig3_fit",
        &[
            ("relative_phase", "rad/pi"),
            ("count", "count"),
            ("mean", "SNU"),
            ("variance", "SNU^2"),
            ("theory_mean", "SNU"),
            ("theory_variance", "SNU^2"),
        ],
    );
    let amplitude = params.received_amplitude();
    for (k, samples) in by_phase.iter().enumerate() {
        let (m, v) = mean_var(samples);
        let cos = [1.0, 0.0, -1.0, 0.0][k];
        fit.push(vec![
            PHASE_LABELS[k].into(),
            samples.len().into(),
            m.into(),
            v.into(),
            (amplitude * cos).into(),
            params.sample_variance().into(),
        ]);
    }

    // Matched-basis spread about each peak's own mean.
    let (m0, _) = mean_var(&by_phase[0]);
    let (m2, _) = mean_var(&by_phase[2]);
    let ss: f64 = by_phase[0].iter().map(|x| (x - m0).powi(2)).sum::<f64>()
        + by_phase[2].iter().map(|x| (x - m2).powi(2)).sum::<f64>();
    let pooled = ss / (by_phase[0].len() + by_phase[2].len() - 2) as f64;
    let ks = ks_two_sample(&by_phase[1], &by_phase[3]);

    let mut summary = Table::summary("fig3_summary");
    summary.entry("sifted_samples", matched.len(), "count");
    summary.entry("mean_phi_0", m0, "SNU");
    summary.entry("mean_phi_pi", m2, "SNU");
    summary.entry("pooled_variance_matched", pooled, "SNU^2");
    summary.entry("theory_mean_magnitude", amplitude, "SNU");
    summary.entry("theory_variance", params.sample_variance(), "SNU^2");
    summary.entry("ks_statistic_pi_2_vs_3pi_2", ks.statistic, "1");
    summary.entry("ks_p_value_pi_2_vs_3pi_2", ks.p_value, "probability");

    let mut report = Report::new("fig3", config.sha256());
    report.tables.extend([hist, fit, summary]);
    Ok(report)
}
