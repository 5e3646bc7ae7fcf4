use dmcv::calibration::{integrate_pulses, recover_quadratures, shot_noise_scan, snu_normalize, synthesize_trace};
use dmcv::protocol::{empirical_summary, run_protocol, ProtocolParams, TrialRecord};
use dmcv::rng::Role;

use super::{experiment_seed, Command, RunError};
use crate::config::ExperimentConfig;
use crate::output::{Attachment, Report, Table};

/// Shot-noise scan, then one synthetic acquisition of protocol samples
/// pushed through trace synthesis, integration and normalisation.
pub fn run_calibrate(config: &ExperimentConfig) -> Result<Report, RunError> {
    let c = &config.calibration;
    let seed = experiment_seed(config, Command::Calibrate);
    let fit = shot_noise_scan(&c.lo_powers, c.n_pulses_each, &c.detector, &mut seed.stream(Role::Calibration, 0))?;

    let params = ProtocolParams {
        n_pulses: c.trace_pulses,
        ..config.protocol.to_params(seed.child(1).0)?
    };
    let direct = run_protocol(&params)?;
    let raw: Vec<f64> = direct.iter().map(|r| c.detector.to_raw(r.sample)).collect();
    let spec = c.pulse;
    let per_window = c.digitiser_noise * c.detector.true_snu().sqrt() * spec.gain * spec.pulse_width;
    let sigma = per_window / (spec.dt() * (spec.window_len() as f64).sqrt());
    let trace = synthesize_trace(&raw, &spec, sigma, &mut seed.stream(Role::TraceNoise, 0))?;
    let integrals = integrate_pulses(&trace, &spec)?;
    let normalized = snu_normalize(&recover_quadratures(&integrals, &spec), &fit)?;
    let rebuilt: Vec<TrialRecord> = direct
        .iter()
        .zip(&normalized)
        .map(|(r, &x)| {
            let pulse = dmcv::protocol::PreparedPulse::from(r.alice_phase);
            TrialRecord::new(pulse, r.bob_basis, x, params.x0)
        })
        .collect();
    let a = empirical_summary(&direct)?;
    let b = empirical_summary(&rebuilt)?;

    let mut scan = Table::new(
        "calibration_scan",
        &[("lo_power", "mW"), ("variance", "raw^2"), ("fitted_variance", "raw^2")],
    );
    for p in &fit.points {
        scan.push(vec![
            p.lo_power.into(),
            p.variance.into(),
            (fit.slope * p.lo_power + fit.intercept).into(),
        ]);
    }

    let mut s = Table::summary("calibration_summary");
    s.entry("slope", fit.slope, "raw^2/mW");
    s.entry("slope_std_error", fit.slope_std_error, "raw^2/mW");
    s.entry("intercept", fit.intercept, "raw^2");
    s.entry("intercept_std_error", fit.intercept_std_error, "raw^2");
    s.entry("r_squared", fit.r_squared, "1");
    s.entry("operating_power", fit.operating_power, "mW");
    s.entry("snu", fit.snu, "raw^2/SNU^2");
    s.entry("clearance", fit.clearance, "1");
    s.entry("configured_clearance", c.detector.clearance(), "1");
    s.entry("trace_pulses", c.trace_pulses, "count");
    s.entry("trace_samples", trace.samples.len(), "count");
    s.entry("direct_sifted", a.sifted_count, "count");
    s.entry("direct_conclusive", a.conclusive_count, "count");
    s.entry("direct_pse", a.pse, "probability");
    s.entry("direct_qber", a.qber, "probability");
    s.entry("chain_sifted", b.sifted_count, "count");
    s.entry("chain_conclusive", b.conclusive_count, "count");
    s.entry("chain_pse", b.pse, "probability");
    s.entry("chain_qber", b.qber, "probability");

    let mut values = Table::new(
        "calibration_integrated",
        &[("pulse_index", "index"), ("integral", "trace units*s"), ("quadrature", "SNU")],
    );
    for (i, (a, x)) in integrals.iter().zip(&normalized).enumerate() {
        values.push(vec![i.into(), (*a).into(), (*x).into()]);
    }

    let mut report = Report::new("calibrate", config.sha256());
    report.tables.extend([scan, s, values]);
    if c.write_trace {
        report.attachments.push(Attachment::Trace {
            name: "calibration_trace".into(),
            trace,
            spec,
        });
    }
    Ok(report)
}
