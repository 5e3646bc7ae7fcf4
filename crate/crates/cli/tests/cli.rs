use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dmcv_cli::experiments::{run_e2e, PipelineStatus};
use dmcv_cli::ExperimentConfig;

fn dmcv(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dmcv"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn summary_value(path: &Path, key: &str) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")).map(|rest| rest.split(',').next().unwrap().to_string()))
        .unwrap_or_else(|| panic!("{key} missing"))
}

#[test]
fn bad_override_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dmcv(&["fig3", "--set", "fig3.transmittance=2"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fig3"));
    let out = dmcv(&["fig3", "--set", "fig3.nope=1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unreadable_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    fs::write(&path, "{ not json").unwrap();
    let out = dmcv(&["fig2", "--config", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    fs::write(&path, r#"{"fig3": {"n_sifted": 2000, "bins": 10}}"#).unwrap();
    let out = dmcv(&["fig3", "--config", path.to_str().unwrap(), "--seed", "9"], &dir.path().join("o"));
    assert!(out.status.success());
    let hist = fs::read_to_string(dir.path().join("o/fig3_histogram.csv")).unwrap();
    assert!(hist.starts_with("# config_sha256="));
    assert_eq!(hist.lines().count(), 3 + 10);
    assert_eq!(summary_value(&dir.path().join("o/fig3_summary.csv"), "sifted_samples"), "2000");
}

#[test]
fn sweep_header_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    assert!(dmcv(&["fig2", "--set", "fig2.mc_trials=1000"], dir.path()).status.success());
    let text = fs::read_to_string(dir.path().join("fig2_key_rate.csv")).unwrap();
    assert_eq!(text.lines().nth(2).unwrap(), "T,distance_km,xi,I_AB,I_BE,k_per_sifted,k_per_pulse");
    let config = ExperimentConfig::default();
    let rows = text.lines().count() - 3;
    assert_eq!(rows, config.fig2.transmittances().unwrap().len() * config.fig2.xis.len());
}

#[test]
fn noiseless_link_gives_error_free_matching_keys() {
    let mut c = ExperimentConfig::default();
    for s in [
        "protocol.mean_photon_number=16",
        "protocol.transmittance=1",
        "protocol.eta=1",
        "protocol.xi_ch=0",
        "protocol.xi_ele=0",
        "protocol.n_pulses=20000",
    ] {
        c.set(s).unwrap();
    }
    let (_, r) = run_e2e(&c).unwrap();
    assert_eq!(r.status, PipelineStatus::Completed);
    assert_eq!(r.summary.qber, 0.0);
    assert_eq!(r.qber_estimate, 0.0);
    assert!(r.keys_match() && r.final_len() > 0);
}

#[test]
fn default_point_reconciles_nearly_every_block() {
    let (_, r) = run_e2e(&ExperimentConfig::default()).unwrap();
    assert_eq!(r.status, PipelineStatus::Completed);
    assert!(r.ledger.block_success_rate() >= 0.95);
    assert!(r.keys_match() && r.final_len() > 0);
    assert_eq!(r.ledger.blocks_attempted as usize, r.blocks.len());
    assert_eq!(r.ledger.disclosed_bits as usize, r.disclosed);
}

#[test]
fn tampered_channel_aborts_gracefully() {
    let dir = tempfile::tempdir().unwrap();
    let out = dmcv(&["e2e", "--set", "protocol.xi_ch=2"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let summary = dir.path().join("e2e_summary.csv");
    assert_eq!(summary_value(&summary, "status"), "aborted");
    assert_eq!(summary_value(&summary, "final_key_bits"), "0");
}

#[test]
fn undecodable_blocks_exit_with_reconciliation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dmcv(
        &["e2e", "--set", "protocol.xi_ch=0.5", "--set", "postprocess.qber_abort=0.3", "--set", "postprocess.max_iters=20"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    let summary = dir.path().join("e2e_summary.csv");
    assert_eq!(summary_value(&summary, "status"), "failed");
    assert_eq!(summary_value(&summary, "block_success_rate"), "0");
}

#[test]
fn print_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dmcv(&["fig2", "--print-config", "--seed", "3"], dir.path());
    assert!(out.status.success());
    let c = ExperimentConfig::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(c.protocol.seed, 3);
}

#[test]
fn calibration_writes_trace_with_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dmcv(&["calibrate", "--set", "calibration.trace_pulses=1000", "--format", "json"], dir.path());
    assert!(out.status.success());
    let (trace, spec) = dmcv::calibration::read_trace(&dir.path().join("calibration_trace")).unwrap();
    assert_eq!(trace.samples.len(), 1000 * spec.samples_per_period());
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("calibrate.json")).unwrap()).unwrap();
    assert_eq!(doc["tables"]["calibration_integrated"]["rows"].as_array().unwrap().len(), 1000);
}
