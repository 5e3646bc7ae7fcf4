use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};

use super::KeyBuffer;

/// Outcome of disclosing a random subset of both raw keys.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    /// Mismatch rate on the disclosed positions.
    pub qber_estimate: f64,
    /// Number of positions disclosed by each party.
    pub disclosed: usize,
    pub alice: KeyBuffer,
    pub bob: KeyBuffer,
}

/// Publicly compares a uniformly chosen `fraction` of positions (at least
/// one) and removes them from both keys.
pub fn parameter_estimation<R: Rng + ?Sized>(
    alice: &KeyBuffer,
    bob: &KeyBuffer,
    fraction: f64,
    rng: &mut R,
) -> Result<Estimate> {
    if alice.len() != bob.len() {
        return Err(Error::LengthMismatch {
            expected: alice.len(),
            actual: bob.len(),
        });
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid("fraction", format!("{fraction} outside (0, 1)")));
    }
    let n = alice.len();
    if n < 2 {
        return Err(Error::invalid("key length", "need at least two bits to disclose a fraction"));
    }
    let k = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut disclosed = vec![false; n];
    for i in index::sample(rng, n, k) {
        disclosed[i] = true;
    }
    let mismatches = (0..n)
        .filter(|&i| disclosed[i] && alice.bits()[i] != bob.bits()[i])
        .count();
    let keep = |buf: &KeyBuffer| -> KeyBuffer {
        let bits = buf
            .bits()
            .iter()
            .zip(&disclosed)
            .filter(|(_, &d)| !d)
            .map(|(&b, _)| b)
            .collect();
        buf.replace_bits(bits)
    };
    Ok(Estimate {
        qber_estimate: mismatches as f64 / k as f64,
        disclosed: k,
        alice: keep(alice),
        bob: keep(bob),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::postprocess::Origin;
    use crate::rng::{Role, StreamSeed};

    fn random_bits(n: usize, seed: u64) -> Vec<u8> {
        let mut rng = StreamSeed(seed).stream(Role::Auxiliary, 0);
        (0..n).map(|_| rng.random::<bool>() as u8).collect()
    }

    #[test]
    fn identical_and_complementary() {
        let mut rng = StreamSeed(1).stream(Role::Disclosure, 0);
        let bits = random_bits(1000, 3);
        let a = KeyBuffer::raw(bits.clone(), Origin::Alice);
        let b = KeyBuffer::raw(bits.clone(), Origin::Bob);
        let est = parameter_estimation(&a, &b, 0.2, &mut rng).unwrap();
        assert_eq!(est.qber_estimate, 0.0);
        assert_eq!(est.disclosed, 200);
        assert_eq!(est.alice.len(), 800);
        assert_eq!(est.alice, KeyBuffer::raw(est.bob.bits().to_vec(), Origin::Alice));

        let flipped = KeyBuffer::raw(bits.iter().map(|b| 1 - b).collect(), Origin::Bob);
        let est = parameter_estimation(&a, &flipped, 0.2, &mut rng).unwrap();
        assert_eq!(est.qber_estimate, 1.0);
    }

    #[test]
    fn five_percent_flips_estimated_within_binomial_band() {
        let n = 40_000;
        let bits = random_bits(n, 11);
        let mut flip_rng = StreamSeed(12).stream(Role::Auxiliary, 1);
        let noisy: Vec<u8> = bits.iter().map(|&b| b ^ (flip_rng.random::<f64>() < 0.05) as u8).collect();
        let a = KeyBuffer::raw(bits, Origin::Alice);
        let b = KeyBuffer::raw(noisy, Origin::Bob);
        let est = parameter_estimation(&a, &b, 0.2, &mut StreamSeed(13).stream(Role::Disclosure, 0)).unwrap();
        let sigma = (0.05f64 * 0.95 / est.disclosed as f64).sqrt();
        assert!((est.qber_estimate - 0.05).abs() < 3.0 * sigma, "{}", est.qber_estimate);
        assert_eq!(est.alice.len() + est.disclosed, n);
    }

    #[test]
    fn errors() {
        let mut rng = StreamSeed(1).stream(Role::Disclosure, 0);
        let a = KeyBuffer::raw(vec![0; 10], Origin::Alice);
        let b = KeyBuffer::raw(vec![0; 9], Origin::Bob);
        assert!(matches!(parameter_estimation(&a, &b, 0.2, &mut rng), Err(Error::LengthMismatch { .. })));
        assert!(parameter_estimation(&a, &a, 0.0, &mut rng).is_err());
        assert!(parameter_estimation(&a, &a, 1.0, &mut rng).is_err());
    }
}
