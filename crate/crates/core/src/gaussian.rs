//! Shot-noise-unit Gaussian state algebra.
//!
//! Quadratures are `q = (a + a†)/2`, `p = i(a† - a)/2`, so the vacuum has
//! variance 1/4 in each quadrature and a coherent state `|α⟩` has
//! `⟨q⟩ = Re α`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};

/// Vacuum quadrature variance.
pub const VACUUM_VARIANCE: f64 = 0.25;

/// Measurement basis: the `q` or `p` quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    Q,
    P,
}

impl Basis {
    /// Local-oscillator phase selecting this quadrature.
    pub fn lo_phase(self) -> f64 {
        match self {
            Basis::Q => 0.0,
            Basis::P => FRAC_PI_2,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Basis::Q => 'q',
            Basis::P => 'p',
        }
    }
}

/// One of Alice's four constellation phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SymbolPhase {
    Zero,
    HalfPi,
    Pi,
    ThreeHalfPi,
}

impl SymbolPhase {
    pub const ALL: [SymbolPhase; 4] = [
        SymbolPhase::Zero,
        SymbolPhase::HalfPi,
        SymbolPhase::Pi,
        SymbolPhase::ThreeHalfPi,
    ];

    /// Phase for index `i mod 4` in units of π/2.
    pub fn from_index(i: usize) -> Self {
        Self::ALL[i % 4]
    }

    pub fn index(self) -> usize {
        match self {
            SymbolPhase::Zero => 0,
            SymbolPhase::HalfPi => 1,
            SymbolPhase::Pi => 2,
            SymbolPhase::ThreeHalfPi => 3,
        }
    }

    pub fn radians(self) -> f64 {
        self.index() as f64 * FRAC_PI_2
    }

    /// Basis carrying the bit: `q` for 0 and π, `p` for π/2 and 3π/2.
    pub fn basis(self) -> Basis {
        match self {
            SymbolPhase::Zero | SymbolPhase::Pi => Basis::Q,
            SymbolPhase::HalfPi | SymbolPhase::ThreeHalfPi => Basis::P,
        }
    }

    /// Alice's bit: 1 for 0 and π/2, 0 for π and 3π/2.
    pub fn bit(self) -> u8 {
        match self {
            SymbolPhase::Zero | SymbolPhase::HalfPi => 1,
            SymbolPhase::Pi | SymbolPhase::ThreeHalfPi => 0,
        }
    }

    /// Relative phase `self - lo` reduced to `[0, 2π)`.
    pub fn relative_to(self, lo: Basis) -> f64 {
        (self.radians() - lo.lo_phase()).rem_euclid(2.0 * PI)
    }

    pub fn label(self) -> &'static str {
        match self {
            SymbolPhase::Zero => "0",
            SymbolPhase::HalfPi => "pi/2",
            SymbolPhase::Pi => "pi",
            SymbolPhase::ThreeHalfPi => "3pi/2",
        }
    }
}

/// Coherent-state amplitude α. Mean photon number is `|α|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherentAmplitude {
    pub alpha: Complex64,
}

impl CoherentAmplitude {
    pub fn new(alpha: Complex64) -> Self {
        Self { alpha }
    }

    /// Real amplitude with the given mean photon number.
    pub fn from_mean_photon_number(n: f64) -> Result<Self> {
        if !(n.is_finite() && n >= 0.0) {
            return Err(Error::invalid("mean_photon_number", format!("{n} must be >= 0")));
        }
        Ok(Self::new(Complex64::new(n.sqrt(), 0.0)))
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.alpha.norm_sqr()
    }

    pub fn modulus(&self) -> f64 {
        self.alpha.norm()
    }

    /// The constellation point `α·e^{iφ}`.
    pub fn symbol(&self, phase: SymbolPhase) -> Complex64 {
        self.alpha * Complex64::from_polar(1.0, phase.radians())
    }

    /// Amplitude after a beam splitter of intensity transmittance `t`.
    pub fn attenuate(&self, t: f64) -> Self {
        Self::new(self.alpha * t.sqrt())
    }
}

/// Symmetric 2×2 single-mode quadrature covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovMatrix2 {
    pub qq: f64,
    pub pp: f64,
    pub qp: f64,
}

impl CovMatrix2 {
    pub fn diagonal(v: f64) -> Self {
        Self { qq: v, pp: v, qp: 0.0 }
    }

    pub fn det(&self) -> f64 {
        self.qq * self.pp - self.qp * self.qp
    }

    pub fn is_positive_semidefinite(&self) -> bool {
        self.qq >= 0.0 && self.pp >= 0.0 && self.det() >= 0.0
    }

    /// Uncertainty bound `det V >= 1/16`, with a small absolute slack.
    pub fn is_physical(&self) -> bool {
        self.is_positive_semidefinite() && self.det() >= VACUUM_VARIANCE * VACUUM_VARIANCE - 1e-12
    }
}

/// Vacuum (and coherent-state) covariance, `I/4`.
pub fn vacuum_covariance() -> CovMatrix2 {
    CovMatrix2::diagonal(VACUUM_VARIANCE)
}

/// Covariance of the equal mixture of the four constellation states,
/// `(|α|²/2 + 1/4)·I`.
pub fn ensemble_covariance(alpha: CoherentAmplitude) -> CovMatrix2 {
    CovMatrix2::diagonal(modulation_variance(alpha) + VACUUM_VARIANCE)
}

/// Alice's modulation variance `|α|²/2`.
pub fn modulation_variance(alpha: CoherentAmplitude) -> f64 {
    alpha.mean_photon_number() / 2.0
}

/// Environment-mode variance `1/4 + ξ/(1-T)` that makes a beam splitter of
/// transmittance `t` add `xi` at its signal output.
pub fn environment_variance(t: f64, xi: f64) -> f64 {
    VACUUM_VARIANCE + xi / (1.0 - t)
}

/// Real symmetric 4×4 covariance of (signal, environment), ordered
/// `(q_sig, p_sig, q_env, p_env)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointCovMatrix4(pub [[f64; 4]; 4]);

impl JointCovMatrix4 {
    pub fn block_diagonal(signal_var: f64, env_var: f64) -> Self {
        let mut m = [[0.0; 4]; 4];
        m[0][0] = signal_var;
        m[1][1] = signal_var;
        m[2][2] = env_var;
        m[3][3] = env_var;
        Self(m)
    }

    /// The 2×2 block at block row `r`, block column `c` (0 = signal, 1 = env).
    pub fn block(&self, r: usize, c: usize) -> [[f64; 2]; 2] {
        let m = &self.0;
        [
            [m[2 * r][2 * c], m[2 * r][2 * c + 1]],
            [m[2 * r + 1][2 * c], m[2 * r + 1][2 * c + 1]],
        ]
    }

    pub fn signal(&self) -> CovMatrix2 {
        CovMatrix2 {
            qq: self.0[0][0],
            pp: self.0[1][1],
            qp: self.0[0][1],
        }
    }

    pub fn environment(&self) -> CovMatrix2 {
        CovMatrix2 {
            qq: self.0[2][2],
            pp: self.0[3][3],
            qp: self.0[2][3],
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..4).all(|i| (0..4).all(|j| (self.0[i][j] - self.0[j][i]).abs() <= tol))
    }

    /// Eigenvalues in ascending order (cyclic Jacobi rotations).
    pub fn eigenvalues(&self) -> [f64; 4] {
        let mut a = self.0;
        for _sweep in 0..64 {
            let off: f64 = (0..4)
                .flat_map(|i| (0..4).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i][j] * a[i][j])
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..3 {
                for q in (p + 1)..4 {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..4 {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..4 {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev = [a[0][0], a[1][1], a[2][2], a[3][3]];
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        self.eigenvalues()[0] >= -tol
    }
}

/// The symplectic beam-splitter matrix acting on `(q_sig, p_sig, q_env, p_env)`.
pub fn beam_splitter_matrix(t: f64) -> [[f64; 4]; 4] {
    let a = t.sqrt();
    let b = (1.0 - t).sqrt();
    [
        [a, 0.0, b, 0.0],
        [0.0, a, 0.0, b],
        [-b, 0.0, a, 0.0],
        [0.0, -b, 0.0, a],
    ]
}

/// `BS · diag(signal_var·I, env_var·I) · BSᵀ` for a beam splitter of
/// transmittance `t`.
pub fn bs_joint_transform(signal_var: f64, env_var: f64, t: f64) -> Result<JointCovMatrix4> {
    check_range("transmittance", t, 0.0, 1.0)?;
    for (name, v) in [("signal_var", signal_var), ("env_var", env_var)] {
        if !(v.is_finite() && v >= VACUUM_VARIANCE) {
            return Err(Error::invalid(name, format!("{v} below vacuum variance 1/4")));
        }
    }
    let bs = beam_splitter_matrix(t);
    let input = JointCovMatrix4::block_diagonal(signal_var, env_var).0;
    let mut tmp = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            tmp[i][j] = (0..4).map(|k| bs[i][k] * input[k][j]).sum();
        }
    }
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| tmp[i][k] * bs[j][k]).sum();
        }
    }
    Ok(JointCovMatrix4(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn vacuum_is_quarter_identity() {
        let v = vacuum_covariance();
        assert_eq!(v, CovMatrix2 { qq: 0.25, pp: 0.25, qp: 0.0 });
        assert_eq!(v.det(), 1.0 / 16.0);
        assert!(v.is_physical());
        let zero = CoherentAmplitude::from_mean_photon_number(0.0).unwrap();
        assert_eq!(ensemble_covariance(zero), v);
    }

    #[test]
    fn ensemble_covariance_examples() {
        for (alpha, want) in [(1.0, 0.75), (0.0, 0.25), (2.0, 2.25)] {
            let a = CoherentAmplitude::new(Complex64::new(alpha, 0.0));
            assert_eq!(ensemble_covariance(a), CovMatrix2::diagonal(want));
        }
    }

    #[test]
    fn ensemble_covariance_matches_constellation_moments() {
        // second moments of the four displaced vacua, averaged
        let a = CoherentAmplitude::new(Complex64::from_polar(1.3, 0.4));
        let (mut qq, mut pp, mut qp) = (0.0, 0.0, 0.0);
        for phase in SymbolPhase::ALL {
            let s = a.symbol(phase);
            qq += s.re * s.re / 4.0;
            pp += s.im * s.im / 4.0;
            qp += s.re * s.im / 4.0;
        }
        let v = ensemble_covariance(a);
        assert!((qq + 0.25 - v.qq).abs() < 1e-12);
        assert!((pp + 0.25 - v.pp).abs() < 1e-12);
        assert!(qp.abs() < 1e-12);
    }

    #[test]
    fn mean_photon_number_is_modulus_squared() {
        let a = CoherentAmplitude::new(Complex64::new(0.3, -1.1));
        let n = a.mean_photon_number();
        assert!((n - (0.09 + 1.21)).abs() <= 1e-12 * n);
    }

    #[test]
    fn phase_tables() {
        assert_eq!((SymbolPhase::Zero.bit(), SymbolPhase::Zero.basis()), (1, Basis::Q));
        assert_eq!((SymbolPhase::HalfPi.bit(), SymbolPhase::HalfPi.basis()), (1, Basis::P));
        assert_eq!((SymbolPhase::Pi.bit(), SymbolPhase::Pi.basis()), (0, Basis::Q));
        assert_eq!(
            (SymbolPhase::ThreeHalfPi.bit(), SymbolPhase::ThreeHalfPi.basis()),
            (0, Basis::P)
        );
        assert!((SymbolPhase::Zero.relative_to(Basis::P) - 1.5 * PI).abs() < 1e-15);
    }

    #[test]
    fn transparent_and_reflecting_splitters() {
        let m = bs_joint_transform(0.75, 0.4, 1.0).unwrap();
        assert_eq!(m, JointCovMatrix4::block_diagonal(0.75, 0.4));
        let m = bs_joint_transform(0.75, 0.4, 0.0).unwrap();
        assert_eq!(m.signal(), CovMatrix2::diagonal(0.4));
        assert_eq!(m.environment(), CovMatrix2::diagonal(0.75));
    }

    #[test]
    fn signal_block_at_lab_operating_point() {
        // 0.9·0.75 + 0.1·(0.25 + 0.02/0.1) = 0.72, multiplied out by hand
        let t = 0.9;
        let m = bs_joint_transform(0.75, environment_variance(t, 0.02), t).unwrap();
        assert!((m.0[0][0] - 0.72).abs() < 1e-12);
        assert!((m.0[1][1] - 0.72).abs() < 1e-12);
        assert_eq!(m.0[0][1], 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(bs_joint_transform(0.75, 0.25, 1.2).is_err());
        assert!(bs_joint_transform(0.75, 0.25, -0.1).is_err());
        assert!(bs_joint_transform(0.2, 0.25, 0.5).is_err());
        assert!(CoherentAmplitude::from_mean_photon_number(-1.0).is_err());
    }

    #[test]
    fn eigenvalues_of_known_matrix() {
        // block [[a, b], [b, a]] ⊗ I has eigenvalues a ± b, each twice
        let mut m = JointCovMatrix4::block_diagonal(2.0, 2.0).0;
        m[0][2] = 0.5;
        m[2][0] = 0.5;
        m[1][3] = 0.5;
        m[3][1] = 0.5;
        let ev = JointCovMatrix4(m).eigenvalues();
        for (got, want) in ev.iter().zip([1.5, 1.5, 2.5, 2.5]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn bs_output_symmetric_psd(
            t in 0.0f64..=1.0,
            sv in 0.25f64..10.0,
            ev in 0.25f64..10.0,
        ) {
            let m = bs_joint_transform(sv, ev, t).unwrap();
            prop_assert!(m.is_symmetric(1e-12));
            prop_assert!(m.is_positive_semidefinite(1e-10));
            prop_assert!(m.signal().is_physical());
            let want = t * sv + (1.0 - t) * ev;
            prop_assert!((m.0[0][0] - want).abs() < 1e-12 * want.max(1.0));
            // total variance is conserved by a passive element
            let trace_in = 2.0 * (sv + ev);
            let trace_out: f64 = (0..4).map(|i| m.0[i][i]).sum();
            prop_assert!((trace_in - trace_out).abs() < 1e-12 * trace_in);
        }

        #[test]
        fn bs_signal_block_equals_v_bob(
            n in 0.0f64..5.0,
            t in 0.0f64..0.999,
            xi in 0.0f64..0.5,
        ) {
            let a = CoherentAmplitude::from_mean_photon_number(n).unwrap();
            let m = bs_joint_transform(ensemble_covariance(a).qq, environment_variance(t, xi), t).unwrap();
            let v_bob = t * n / 2.0 + 0.25 + xi;
            prop_assert!((m.0[0][0] - v_bob).abs() < 1e-12 * v_bob.max(1.0));
            prop_assert!((m.0[1][1] - v_bob).abs() < 1e-12 * v_bob.max(1.0));
        }
    }
}
