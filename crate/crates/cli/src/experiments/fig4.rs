use dmcv::channel::{ChannelParams, DetectorParams};
use dmcv::gaussian::CoherentAmplitude;
use dmcv::protocol::{pse_theory, qber_theory, summary_at_threshold, ProtocolParams};

use super::{collect_sifted, experiment_seed, Command, RunError};
use crate::config::ExperimentConfig;
use crate::output::{Report, Table};

/// PSE and QBER against threshold, closed form beside Monte Carlo.
///
/// For each mean photon number one set of sifted samples is drawn and
/// re-thresholded at every x0, so the Monte Carlo PSE column is monotone
/// by construction.
pub fn run_fig4(config: &ExperimentConfig) -> Result<Report, RunError> {
    let f = &config.fig4;
    let seed = experiment_seed(config, Command::Fig4);
    let x0s = f.x0.values();
    let mut table = Table::new(
        "fig4_threshold",
        &[
            ("x0", "SNU"),
            ("mean_photon", "photons"),
            ("PSE", "probability"),
            ("QBER", "probability"),
            ("PSE_mc", "probability"),
            ("QBER_mc", "probability"),
            ("PSE_mc_se", "probability"),
            ("QBER_mc_se", "probability"),
            ("sifted", "count"),
            ("conclusive", "count"),
        ],
    );
    for (i, &n) in f.mean_photon_numbers.iter().enumerate() {
        let base = ProtocolParams {
            alpha: CoherentAmplitude::from_mean_photon_number(n)?,
            channel: ChannelParams::new(f.transmittance, f.xi)?,
            detector: DetectorParams::new(f.eta, 0.0)?,
            x0: 0.0,
            n_pulses: 1,
            seed: seed.child(i as u64).0,
            disclosure_fraction: 0.0,
        };
        let (sifted, _) = collect_sifted(&base, f.mc_sifted)?;
        for &x0 in &x0s {
            let p = ProtocolParams { x0, ..base };
            let (pse, qber) = (pse_theory(&p), qber_theory(&p));
            let (pse_mc, qber_mc, conclusive) = match summary_at_threshold(&sifted, x0) {
                Ok(s) => (s.pse, s.qber, s.conclusive_count),
                Err(dmcv::Error::NoConclusive) => (0.0, f64::NAN, 0),
                Err(e) => return Err(e.into()),
            };
            // Binomial standard errors at the closed-form probabilities.
            let pse_se = (pse * (1.0 - pse) / sifted.len() as f64).sqrt();
            let expected_conclusive = (pse * sifted.len() as f64).max(1.0);
            let qber_se = (qber * (1.0 - qber) / expected_conclusive).sqrt();
            table.push(vec![
                x0.into(),
                n.into(),
                pse.into(),
                qber.into(),
                pse_mc.into(),
                qber_mc.into(),
                pse_se.into(),
                qber_se.into(),
                sifted.len().into(),
                conclusive.into(),
            ]);
        }
    }
    let mut report = Report::new("fig4", config.sha256());
    report.tables.push(table);
    Ok(report)
}
