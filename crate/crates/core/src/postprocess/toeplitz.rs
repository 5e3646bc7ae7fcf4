//! Toeplitz hashing over GF(2).
//!
//! A seed `s` of length `n_in + n_out - 1` defines the `n_out × n_in`
//! matrix `T[i][j] = s[i - j + n_in - 1]`: the last column is
//! `s[0..n_out]` read downwards and the first row is `s[0..n_in]` read
//! right to left.

use rand::Rng;

use crate::error::{Error, Result};

use super::{HexBits, KeyBuffer, Stage};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToeplitzSeed {
    bits: Vec<u8>,
    n_in: usize,
    n_out: usize,
}

impl ToeplitzSeed {
    pub fn new(bits: Vec<u8>, n_in: usize, n_out: usize) -> Result<Self> {
        if n_in == 0 || n_out == 0 {
            return Err(Error::invalid("toeplitz dimensions", "n_in and n_out must be positive"));
        }
        if bits.len() != n_in + n_out - 1 {
            return Err(Error::LengthMismatch {
                expected: n_in + n_out - 1,
                actual: bits.len(),
            });
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::invalid("toeplitz seed", "bits must be 0 or 1"));
        }
        Ok(Self { bits, n_in, n_out })
    }

    pub fn random<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Result<Self> {
        let len = (n_in + n_out).saturating_sub(1);
        Self::new((0..len).map(|_| rng.random::<bool>() as u8).collect(), n_in, n_out)
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn entry(&self, i: usize, j: usize) -> u8 {
        self.bits[i + self.n_in - 1 - j]
    }

    pub fn to_hex(&self) -> HexBits {
        HexBits::encode(&self.bits)
    }
}

fn pack(bits: impl ExactSizeIterator<Item = u8>) -> Vec<u64> {
    let mut words = vec![0u64; bits.len().div_ceil(64) + 1];
    for (k, b) in bits.enumerate() {
        words[k / 64] |= (b as u64) << (k % 64);
    }
    words
}

/// `T_seed · key` over GF(2), producing a final-stage key of `n_out` bits.
pub fn toeplitz_hash(key: &KeyBuffer, seed: &ToeplitzSeed, n_out: usize) -> Result<KeyBuffer> {
    if n_out != seed.n_out || key.len() != seed.n_in {
        return Err(Error::invalid(
            "toeplitz dimensions",
            format!(
                "seed is {}×{}, asked for {}×{}",
                seed.n_out,
                seed.n_in,
                n_out,
                key.len()
            ),
        ));
    }
    if n_out > key.len() {
        return Err(Error::invalid("toeplitz n_out", "output longer than input"));
    }
    let n_in = seed.n_in;
    // Row i of T is rev[n_out-1-i ..][..n_in] with rev the reversed seed.
    let rev = pack(seed.bits.iter().rev().copied());
    let key_words = pack(key.bits().iter().copied());
    let full_words = n_in / 64;
    let tail_bits = n_in % 64;
    let window_word = |offset: usize, t: usize| -> u64 {
        let w = offset / 64 + t;
        let s = offset % 64;
        if s == 0 {
            rev[w]
        } else {
            (rev[w] >> s) | (rev[w + 1] << (64 - s))
        }
    };
    let out: Vec<u8> = (0..n_out)
        .map(|i| {
            let offset = n_out - 1 - i;
            let mut acc = 0u64;
            for t in 0..full_words {
                acc ^= window_word(offset, t) & key_words[t];
            }
            if tail_bits > 0 {
                let mask = (1u64 << tail_bits) - 1;
                acc ^= window_word(offset, full_words) & key_words[full_words] & mask;
            }
            (acc.count_ones() & 1) as u8
        })
        .collect();
    Ok(KeyBuffer::with_stage(out, key.origin(), Stage::Final))
}
