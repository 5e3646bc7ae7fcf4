use dmcv::channel::{distance_to_transmittance, ChannelParams, DetectorParams};
use dmcv::gaussian::CoherentAmplitude;
use dmcv::protocol::ProtocolParams;
use dmcv::rng::Role;
use dmcv::security::{estimate_mutual_info_be, mutual_info_be, sweep_key_rate, ReconciliationParams};
use rayon::prelude::*;

use super::{experiment_seed, Command, RunError};
use crate::config::ExperimentConfig;
use crate::output::{Report, Table};

/// Key rate and informations over the transmittance × excess-noise grid.
pub fn run_fig2(config: &ExperimentConfig) -> Result<Report, RunError> {
    let f = &config.fig2;
    let alpha = CoherentAmplitude::from_mean_photon_number(f.mean_photon_number)?;
    let base = ProtocolParams {
        alpha,
        channel: ChannelParams::lossless(),
        detector: DetectorParams::new(f.eta, 0.0)?,
        x0: f.x0,
        n_pulses: 1,
        seed: config.protocol.seed,
        disclosure_fraction: 0.0,
    };
    let recon = ReconciliationParams {
        beta: f.beta,
        ..config.recon
    };
    let ts = f.transmittances()?;
    let rows = sweep_key_rate(&ts, &f.xis, &base, recon, config.attack, f.loss_db_per_km)?;

    let mut curves = Table::new(
        "fig2_key_rate",
        &[
            ("T", "1"),
            ("distance_km", "km"),
            ("xi", "SNU"),
            ("I_AB", "bits/sifted pulse"),
            ("I_BE", "bits/conclusive bit"),
            ("k_per_sifted", "bits/sifted pulse"),
            ("k_per_pulse", "bits/pulse"),
        ],
    );
    for r in &rows {
        curves.push(vec![
            r.transmittance.into(),
            r.distance_km.into(),
            r.xi.into(),
            r.i_ab.into(),
            r.i_be.into(),
            r.k_per_sifted.into(),
            r.k_per_pulse.into(),
        ]);
    }

    // Per-ξ summary: key at the configured distances and the shortest
    // transmittance with a positive key.
    let mut cutoff = Table::new(
        "fig2_cutoff",
        &[
            ("xi", "SNU"),
            ("distance_km", "km"),
            ("T", "1"),
            ("k_per_pulse", "bits/pulse"),
            ("min_positive_T", "1"),
        ],
    );
    for &xi in &f.xis {
        let of_xi: Vec<_> = rows.iter().filter(|r| r.xi == xi).collect();
        let min_positive = of_xi
            .iter()
            .filter(|r| r.k_per_pulse > 0.0)
            .map(|r| r.transmittance)
            .fold(f64::NAN, f64::min);
        for &d in &f.extra_distances_km {
            let t = distance_to_transmittance(d, f.loss_db_per_km)?;
            let k = of_xi
                .iter()
                .find(|r| r.transmittance == t)
                .map_or(f64::NAN, |r| r.k_per_pulse);
            cutoff.push(vec![xi.into(), d.into(), t.into(), k.into(), min_positive.into()]);
        }
    }

    let seed = experiment_seed(config, Command::Fig2);
    let checks: Vec<_> = f
        .mc_points
        .par_iter()
        .enumerate()
        .map(|(i, &[t, xi])| {
            let exact = mutual_info_be(alpha, t, f.eta, xi, f.x0, config.attack.eve_noise);
            let mut rng = seed.stream(Role::EveNoise, i as u64);
            let mc = estimate_mutual_info_be(alpha, t, f.eta, xi, f.x0, config.attack.eve_noise, f.mc_trials, &mut rng);
            (t, xi, exact, mc)
        })
        .collect();
    let mut mc = Table::new(
        "fig2_mc_check",
        &[
            ("T", "1"),
            ("xi", "SNU"),
            ("I_BE", "bits/conclusive bit"),
            ("I_BE_mc", "bits/conclusive bit"),
            ("I_BE_mc_se", "bits/conclusive bit"),
            ("trials", "count"),
            ("accepted", "count"),
        ],
    );
    for (t, xi, exact, est) in checks {
        mc.push(vec![
            t.into(),
            xi.into(),
            exact.into(),
            est.value.into(),
            est.std_error.into(),
            est.trials.into(),
            est.accepted.into(),
        ]);
    }

    let mut report = Report::new("fig2", config.sha256());
    report.tables.extend([curves, cutoff, mc]);
    Ok(report)
}
