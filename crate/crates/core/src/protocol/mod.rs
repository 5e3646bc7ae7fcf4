//! Monte Carlo execution of the four-phase protocol: preparation, basis
//! choice, homodyne sampling, sifting and post-selection.
//!
//! Bob's local oscillator is phase-locked to the carrier of α, so a sample
//! has mean `sqrt(Tη)·|α|·cos(φ_A - φ_B)` and variance `1/4 + ξ_ch + ξ_ele`.

mod records;
mod theory;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelParams, DetectorParams};
use crate::error::{check_non_negative, Error, Result};
use crate::gaussian::{Basis, CoherentAmplitude, SymbolPhase, VACUUM_VARIANCE};
use crate::rng::{Role, SimRng, StreamSeed};

pub use records::{read_records_csv, write_records_csv, RECORDS_CSV_HEADER};
pub use theory::{homodyne_terms, pse_theory, qber_theory, HomodyneTerms};

/// Pulses per independently seeded simulation block.
pub const BLOCK_LEN: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub alpha: CoherentAmplitude,
    pub channel: ChannelParams,
    pub detector: DetectorParams,
    /// Post-selection threshold, shot-noise units.
    pub x0: f64,
    pub n_pulses: usize,
    pub seed: u64,
    /// Fraction of the sifted key disclosed for parameter estimation.
    pub disclosure_fraction: f64,
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.detector.validate()?;
        check_non_negative("x0", self.x0)?;
        if !self.alpha.alpha.re.is_finite() || !self.alpha.alpha.im.is_finite() {
            return Err(Error::invalid("alpha", "amplitude must be finite"));
        }
        if self.n_pulses == 0 {
            return Err(Error::invalid("n_pulses", "at least one pulse is required"));
        }
        if !(0.0..1.0).contains(&self.disclosure_fraction) {
            return Err(Error::invalid(
                "disclosure_fraction",
                format!("{} outside [0, 1)", self.disclosure_fraction),
            ));
        }
        Ok(())
    }

    /// Total excess noise at Bob.
    pub fn excess_noise(&self) -> f64 {
        self.channel.xi_ch + self.detector.xi_ele
    }

    /// Bob's quadrature variance for a fixed symbol.
    pub fn sample_variance(&self) -> f64 {
        VACUUM_VARIANCE + self.excess_noise()
    }

    /// `sqrt(Tη)·|α|`, the displacement Bob sees in a matched basis.
    pub fn received_amplitude(&self) -> f64 {
        (self.channel.transmittance * self.detector.eta).sqrt() * self.alpha.modulus()
    }

    /// Mean of Bob's sample for a given symbol and LO basis.
    pub fn sample_mean(&self, phase: SymbolPhase, lo: Basis) -> f64 {
        let lo_index = match lo {
            Basis::Q => 0,
            Basis::P => 1,
        };
        let cos = match (phase.index() + 4 - lo_index) % 4 {
            0 => 1.0,
            2 => -1.0,
            _ => 0.0,
        };
        self.received_amplitude() * cos
    }

    pub fn stream_seed(&self) -> StreamSeed {
        StreamSeed(self.seed)
    }
}

/// One prepared pulse on Alice's side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreparedPulse {
    pub phase: SymbolPhase,
    pub bit: u8,
    pub basis: Basis,
}

impl From<SymbolPhase> for PreparedPulse {
    fn from(phase: SymbolPhase) -> Self {
        Self {
            phase,
            bit: phase.bit(),
            basis: phase.basis(),
        }
    }
}

/// Bob's decision for one pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Bit0,
    Bit1,
    Inconclusive,
    Unsifted,
}

impl Verdict {
    pub fn bit(self) -> Option<u8> {
        match self {
            Verdict::Bit0 => Some(0),
            Verdict::Bit1 => Some(1),
            _ => None,
        }
    }

    pub fn is_sifted(self) -> bool {
        self != Verdict::Unsifted
    }

    pub fn is_conclusive(self) -> bool {
        self.bit().is_some()
    }

    pub fn token(self) -> &'static str {
        match self {
            Verdict::Bit0 => "bit0",
            Verdict::Bit1 => "bit1",
            Verdict::Inconclusive => "inconclusive",
            Verdict::Unsifted => "unsifted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub alice_phase: SymbolPhase,
    pub alice_bit: u8,
    pub alice_basis: Basis,
    pub bob_basis: Basis,
    /// Homodyne sample `x_φ`, shot-noise units.
    pub sample: f64,
    pub verdict: Verdict,
}

impl TrialRecord {
    pub fn new(pulse: PreparedPulse, bob_basis: Basis, sample: f64, x0: f64) -> Self {
        let verdict = if pulse.basis == bob_basis {
            postselect(sample, x0)
        } else {
            Verdict::Unsifted
        };
        Self {
            alice_phase: pulse.phase,
            alice_bit: pulse.bit,
            alice_basis: pulse.basis,
            bob_basis,
            sample,
            verdict,
        }
    }

    /// Relative phase `φ_A - φ_B` in `[0, 2π)`.
    pub fn relative_phase(&self) -> f64 {
        self.alice_phase.relative_to(self.bob_basis)
    }

    /// Relative phase as a multiple of π/2.
    pub fn relative_quarter_turns(&self) -> usize {
        let lo = match self.bob_basis {
            Basis::Q => 0,
            Basis::P => 1,
        };
        (self.alice_phase.index() + 4 - lo) % 4
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub sifted_count: usize,
    pub conclusive_count: usize,
    pub error_count: usize,
    pub pse: f64,
    pub qber: f64,
}

/// Alice's uniformly random phases with their bits and bases.
pub fn alice_prepare<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<PreparedPulse> {
    (0..n)
        .map(|_| SymbolPhase::from_index(rng.random_range(0..4)).into())
        .collect()
}

/// Bob's uniformly random measurement bases.
pub fn bob_choose_basis<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Basis> {
    (0..n)
        .map(|_| if rng.random::<bool>() { Basis::P } else { Basis::Q })
        .collect()
}

/// Gaussian homodyne samples for each pulse under the channel and detector
/// in `params`.
pub fn simulate_homodyne<R: Rng + ?Sized>(
    prepared: &[PreparedPulse],
    bob_bases: &[Basis],
    params: &ProtocolParams,
    rng: &mut R,
) -> Result<Vec<f64>> {
    params.channel.validate()?;
    params.detector.validate()?;
    if prepared.len() != bob_bases.len() {
        return Err(Error::LengthMismatch {
            expected: prepared.len(),
            actual: bob_bases.len(),
        });
    }
    let sigma = params.sample_variance().sqrt();
    Ok(prepared
        .iter()
        .zip(bob_bases)
        .map(|(p, &b)| {
            let z: f64 = rng.sample(StandardNormal);
            params.sample_mean(p.phase, b) + sigma * z
        })
        .collect())
}

/// Records whose encoding and measurement bases agree.
pub fn sift(records: &[TrialRecord]) -> Vec<TrialRecord> {
    records
        .iter()
        .filter(|r| r.alice_basis == r.bob_basis)
        .copied()
        .collect()
}

/// Threshold decision; `|x| = x0` is inconclusive.
pub fn postselect(sample: f64, x0: f64) -> Verdict {
    if sample > x0 {
        Verdict::Bit1
    } else if sample < -x0 {
        Verdict::Bit0
    } else {
        Verdict::Inconclusive
    }
}

/// Re-applies the threshold `x0` to sifted records.
pub fn postselect_and_assign(sifted: &[TrialRecord], x0: f64) -> Vec<Verdict> {
    sifted.iter().map(|r| postselect(r.sample, x0)).collect()
}

/// Empirical PSE and QBER over the sifted, conclusive records.
pub fn empirical_summary(records: &[TrialRecord]) -> Result<RunSummary> {
    let mut sifted = 0;
    let mut conclusive = 0;
    let mut errors = 0;
    for r in records {
        if !r.verdict.is_sifted() {
            continue;
        }
        sifted += 1;
        if let Some(bit) = r.verdict.bit() {
            conclusive += 1;
            if bit != r.alice_bit {
                errors += 1;
            }
        }
    }
    if conclusive == 0 {
        return Err(Error::NoConclusive);
    }
    Ok(RunSummary {
        sifted_count: sifted,
        conclusive_count: conclusive,
        error_count: errors,
        pse: conclusive as f64 / sifted as f64,
        qber: errors as f64 / conclusive as f64,
    })
}

/// Summary of sifted samples against a threshold other than the one the
/// records were produced with.
pub fn summary_at_threshold(records: &[TrialRecord], x0: f64) -> Result<RunSummary> {
    let rethresholded: Vec<TrialRecord> = sift(records)
        .into_iter()
        .map(|mut r| {
            r.verdict = postselect(r.sample, x0);
            r
        })
        .collect();
    empirical_summary(&rethresholded)
}

/// One simulation block with its own substreams.
pub fn simulate_block(params: &ProtocolParams, block: u64, len: usize) -> Result<Vec<TrialRecord>> {
    let seed = params.stream_seed();
    let prepared = alice_prepare(len, &mut seed.stream(Role::AlicePhases, block));
    let bases = bob_choose_basis(len, &mut seed.stream(Role::BobBases, block));
    let mut noise: SimRng = seed.stream(Role::ChannelNoise, block);
    let samples = simulate_homodyne(&prepared, &bases, params, &mut noise)?;
    Ok(prepared
        .into_iter()
        .zip(bases)
        .zip(samples)
        .map(|((p, b), x)| TrialRecord::new(p, b, x, params.x0))
        .collect())
}

/// Runs all `n_pulses` pulses in fixed-size blocks, in parallel. The output
/// is identical to running the blocks sequentially.
pub fn run_protocol(params: &ProtocolParams) -> Result<Vec<TrialRecord>> {
    params.validate()?;
    let n = params.n_pulses;
    let blocks = n.div_ceil(BLOCK_LEN);
    let parts: Vec<Vec<TrialRecord>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let len = BLOCK_LEN.min(n - b * BLOCK_LEN);
            simulate_block(params, b as u64, len)
        })
        .collect::<Result<_>>()?;
    Ok(parts.concat())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamSeed;

    pub(crate) fn lab_params(n: usize) -> ProtocolParams {
        ProtocolParams {
            alpha: CoherentAmplitude::from_mean_photon_number(1.0).unwrap(),
            channel: ChannelParams::new(0.9, 0.02).unwrap(),
            detector: DetectorParams::ideal(),
            x0: 0.0,
            n_pulses: n,
            seed: 7,
            disclosure_fraction: 0.1,
        }
    }

    fn three_sigma(p: f64, n: usize) -> f64 {
        3.0 * (p * (1.0 - p) / n as f64).sqrt()
    }

    #[test]
    fn bit_and_basis_assignment() {
        let p: PreparedPulse = SymbolPhase::Zero.into();
        assert_eq!((p.bit, p.basis), (1, Basis::Q));
        let p: PreparedPulse = SymbolPhase::ThreeHalfPi.into();
        assert_eq!((p.bit, p.basis), (0, Basis::P));
    }

    #[test]
    fn alice_phases_uniform() {
        let n = 1_000_000;
        let pulses = alice_prepare(n, &mut StreamSeed(1).stream(Role::AlicePhases, 0));
        let mut counts = [0usize; 4];
        for p in &pulses {
            counts[p.phase.index()] += 1;
            assert_eq!(p.bit, p.phase.bit());
            assert_eq!(p.basis, p.phase.basis());
        }
        // 3σ binomial half-width at n = 1e6 is 0.0013; the stated band is 0.002
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() < 0.002, "{counts:?}");
        }
    }

    #[test]
    fn bob_bases_uniform_deterministic_and_independent() {
        let n = 1_000_000;
        let seed = StreamSeed(99);
        let bases = bob_choose_basis(n, &mut seed.stream(Role::BobBases, 0));
        let again = bob_choose_basis(n, &mut seed.stream(Role::BobBases, 0));
        assert_eq!(bases, again);
        let p_frac = bases.iter().filter(|&&b| b == Basis::P).count() as f64 / n as f64;
        assert!((p_frac - 0.5).abs() < 0.002);

        let alice = alice_prepare(n, &mut seed.stream(Role::AlicePhases, 0));
        let a: Vec<f64> = alice.iter().map(|p| (p.basis == Basis::P) as u8 as f64).collect();
        let b: Vec<f64> = bases.iter().map(|&b| (b == Basis::P) as u8 as f64).collect();
        let ma = a.iter().sum::<f64>() / n as f64;
        let mb = b.iter().sum::<f64>() / n as f64;
        let cov = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n as f64;
        let corr = cov / ((ma * (1.0 - ma)) * (mb * (1.0 - mb))).sqrt();
        assert!(corr.abs() < 0.005, "correlation {corr}");
    }

    fn samples_for(params: &ProtocolParams, phase: SymbolPhase, lo: Basis, n: usize) -> Vec<f64> {
        let prepared = vec![PreparedPulse::from(phase); n];
        let bases = vec![lo; n];
        simulate_homodyne(&prepared, &bases, params, &mut StreamSeed(5).stream(Role::ChannelNoise, 0)).unwrap()
    }

    fn mean_var(x: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        (m, x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn homodyne_moments_at_lab_point() {
        let params = lab_params(1);
        let n = 100_000;
        let (m, v) = mean_var(&samples_for(&params, SymbolPhase::Zero, Basis::Q, n));
        let sigma = 0.27f64.sqrt();
        assert!((m - 0.9f64.sqrt()).abs() < 3.0 * sigma / (n as f64).sqrt());
        assert!((v - 0.27).abs() < 0.01 * 0.27);
        let (m, _) = mean_var(&samples_for(&params, SymbolPhase::Zero, Basis::P, n));
        assert!(m.abs() < 3.0 * sigma / (n as f64).sqrt());
    }

    #[test]
    fn vacuum_samples_have_quarter_variance() {
        let mut params = lab_params(1);
        params.alpha = CoherentAmplitude::from_mean_photon_number(0.0).unwrap();
        params.channel = ChannelParams::lossless();
        let (m, v) = mean_var(&samples_for(&params, SymbolPhase::Pi, Basis::Q, 100_000));
        assert!(m.abs() < 0.005);
        assert!((v - 0.25).abs() < 0.0025);
    }

    #[test]
    fn homodyne_rejects_mismatched_lengths_and_bad_params() {
        let params = lab_params(1);
        let prepared = vec![PreparedPulse::from(SymbolPhase::Zero); 3];
        let mut rng = StreamSeed(0).stream(Role::ChannelNoise, 0);
        assert!(simulate_homodyne(&prepared, &[Basis::Q; 2], &params, &mut rng).is_err());
        let mut bad = params;
        bad.detector.eta = 1.5;
        assert!(simulate_homodyne(&prepared, &[Basis::Q; 3], &bad, &mut rng).is_err());
    }

    #[test]
    fn postselect_case_split() {
        assert_eq!(postselect(0.8, 0.5), Verdict::Bit1);
        assert_eq!(postselect(-0.8, 0.5), Verdict::Bit0);
        assert_eq!(postselect(-0.2, 0.5), Verdict::Inconclusive);
        assert_eq!(postselect(0.5, 0.5), Verdict::Inconclusive);
        assert_eq!(postselect(-0.5, 0.5), Verdict::Inconclusive);
        assert_eq!(postselect(1e-300, 0.0), Verdict::Bit1);
    }

    #[test]
    fn sifting_retention() {
        let all_match: Vec<TrialRecord> = (0..10)
            .map(|i| TrialRecord::new(SymbolPhase::from_index(i).into(), SymbolPhase::from_index(i).basis(), 0.3, 0.0))
            .collect();
        assert_eq!(sift(&all_match).len(), 10);

        let records = run_protocol(&ProtocolParams { n_pulses: 1_000_000, ..lab_params(1) }).unwrap();
        let frac = sift(&records).len() as f64 / records.len() as f64;
        assert!((frac - 0.5).abs() < 0.002);
        for r in &records {
            assert_eq!(r.verdict == Verdict::Unsifted, r.alice_basis != r.bob_basis);
        }

        let records = run_protocol(&ProtocolParams { n_pulses: 81_000, ..lab_params(1) }).unwrap();
        let sifted = sift(&records).len() as f64;
        assert!((sifted - 40_500.0).abs() < 3.0 * (81_000.0f64 * 0.25).sqrt());
    }

    #[test]
    fn zero_threshold_makes_everything_conclusive() {
        let records = run_protocol(&lab_params(20_000)).unwrap();
        let s = empirical_summary(&records).unwrap();
        assert_eq!(s.pse, 1.0);
        assert_eq!(s.conclusive_count, s.sifted_count);
    }

    #[test]
    fn summary_requires_conclusive_records() {
        let r = TrialRecord::new(SymbolPhase::Zero.into(), Basis::Q, 0.1, 1.0);
        assert_eq!(r.verdict, Verdict::Inconclusive);
        assert!(matches!(empirical_summary(&[r]), Err(Error::NoConclusive)));
        assert!(matches!(empirical_summary(&[]), Err(Error::NoConclusive)));
    }

    #[test]
    fn noiseless_large_amplitude_has_no_errors() {
        let params = ProtocolParams {
            alpha: CoherentAmplitude::from_mean_photon_number(100.0).unwrap(),
            channel: ChannelParams::lossless(),
            ..lab_params(20_000)
        };
        let s = empirical_summary(&run_protocol(&params).unwrap()).unwrap();
        assert_eq!(s.qber, 0.0);
    }

    #[test]
    fn qber_at_lab_point_matches_erfc_value() {
        // 0.5·erfc(sqrt(0.9)/sqrt(0.54)) = 0.033944
        let records = run_protocol(&lab_params(200_000)).unwrap();
        let s = empirical_summary(&records).unwrap();
        assert!(s.sifted_count > 99_000);
        assert!((s.qber - 0.033944).abs() < 0.003, "{s:?}");
    }

    #[test]
    fn experiment_point_qber_near_five_percent() {
        let params = ProtocolParams {
            channel: ChannelParams::new(0.95, 0.02).unwrap(),
            detector: DetectorParams::new(0.76, 0.0).unwrap(),
            ..lab_params(200_000)
        };
        let s = empirical_summary(&run_protocol(&params).unwrap()).unwrap();
        assert!((s.qber - 0.05).abs() < 0.01, "{s:?}");
    }

    #[test]
    fn run_is_deterministic_and_partition_independent() {
        let params = lab_params(3 * BLOCK_LEN + 123);
        let a = run_protocol(&params).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| run_protocol(&params).unwrap());
        assert_eq!(a, b);
        let sequential: Vec<TrialRecord> = (0..4)
            .flat_map(|blk| {
                let len = BLOCK_LEN.min(params.n_pulses - blk * BLOCK_LEN);
                simulate_block(&params, blk as u64, len).unwrap()
            })
            .collect();
        assert_eq!(a, sequential);
        let other = run_protocol(&ProtocolParams { seed: 8, ..params }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn summary_matches_closed_form_across_grid() {
        for n_bar in [0.5, 1.0, 2.0] {
            let params = ProtocolParams {
                alpha: CoherentAmplitude::from_mean_photon_number(n_bar).unwrap(),
                ..lab_params(200_000)
            };
            let records = run_protocol(&params).unwrap();
            for x0 in [0.0, 0.25, 0.5, 1.0] {
                let s = summary_at_threshold(&records, x0).unwrap();
                let p = ProtocolParams { x0, ..params };
                let pse = pse_theory(&p);
                let qber = qber_theory(&p);
                let tol_pse = three_sigma(pse, s.sifted_count).max(1e-12);
                let tol_qber = three_sigma(qber, s.conclusive_count);
                assert!((s.pse - pse).abs() <= tol_pse, "n̄={n_bar} x0={x0}: {} vs {pse}", s.pse);
                assert!((s.qber - qber).abs() <= tol_qber, "n̄={n_bar} x0={x0}: {} vs {qber}", s.qber);
            }
        }
    }

    #[test]
    fn empirical_error_shrinks_like_inverse_sqrt_n() {
        // |error|·sqrt(n) stays bounded; averaged over seeds to tame noise
        let p = ProtocolParams { x0: 0.25, ..lab_params(1) };
        let pse = pse_theory(&p);
        let mut scaled = Vec::new();
        for n in [1_000usize, 10_000, 100_000] {
            let mut err2 = 0.0;
            let reps = 20;
            for seed in 0..reps {
                let records = run_protocol(&ProtocolParams { n_pulses: n, seed, ..p }).unwrap();
                let s = empirical_summary(&records).unwrap();
                err2 += (s.pse - pse).powi(2);
            }
            let rms = (err2 / reps as f64).sqrt();
            scaled.push(rms * ((n / 2) as f64).sqrt());
        }
        let expect = (pse * (1.0 - pse)).sqrt();
        for s in scaled {
            assert!(s > 0.4 * expect && s < 1.8 * expect, "rms·sqrt(n) = {s}, σ = {expect}");
        }
    }

    #[test]
    fn mismatched_basis_distributions_indistinguishable() {
        let records = run_protocol(&lab_params(400_000)).unwrap();
        let by_turns = |k: usize| -> Vec<f64> {
            records
                .iter()
                .filter(|r| r.relative_quarter_turns() == k)
                .map(|r| r.sample)
                .take(100_000)
                .collect()
        };
        let ks = crate::special::ks_two_sample(&by_turns(1), &by_turns(3));
        assert!(ks.p_value > 0.01, "{ks:?}");
        let ks = crate::special::ks_two_sample(&by_turns(0), &by_turns(2));
        assert!(ks.p_value < 1e-6);
    }
}
