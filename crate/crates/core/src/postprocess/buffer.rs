use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Alice,
    Bob,
}

/// Processing stage. Buffers only ever move to a later stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Raw,
    Reconciled,
    Final,
}

/// An ordered bit string held by one party. Bits are stored one per byte,
/// each 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyBuffer {
    bits: Vec<u8>,
    origin: Origin,
    stage: Stage,
}

impl KeyBuffer {
    pub fn raw(bits: Vec<u8>, origin: Origin) -> Self {
        Self::with_stage(bits, origin, Stage::Raw)
    }

    pub(crate) fn with_stage(bits: Vec<u8>, origin: Origin, stage: Stage) -> Self {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        Self { bits, origin, stage }
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn into_bits(self) -> Vec<u8> {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    /// Moves to a strictly later stage.
    pub fn advance(self, to: Stage) -> Result<Self> {
        if to <= self.stage {
            return Err(Error::StageOrder { from: self.stage, to });
        }
        Ok(Self { stage: to, ..self })
    }

    /// Same stage and origin, different contents.
    pub(crate) fn replace_bits(&self, bits: Vec<u8>) -> Self {
        Self::with_stage(bits, self.origin, self.stage)
    }

    pub fn hamming_distance(&self, other: &KeyBuffer) -> usize {
        self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count()
    }

    pub fn to_hex(&self) -> HexBits {
        HexBits::encode(&self.bits)
    }
}

/// Bit string as lowercase hex, most significant bit first within each byte
/// and zero-padded at the end, plus the exact bit length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HexBits {
    pub len: usize,
    pub hex: String,
}

impl HexBits {
    pub fn encode(bits: &[u8]) -> Self {
        let bytes: Vec<u8> = bits
            .chunks(8)
            .map(|chunk| chunk.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | (b << (7 - i))))
            .collect();
        Self {
            len: bits.len(),
            hex: hex::encode(bytes),
        }
    }

    pub fn decode(&self) -> Result<Vec<u8>> {
        let bytes = hex::decode(&self.hex).map_err(|e| Error::invalid("hex", e.to_string()))?;
        if bytes.len() != self.len.div_ceil(8) {
            return Err(Error::LengthMismatch {
                expected: self.len.div_ceil(8),
                actual: bytes.len(),
            });
        }
        Ok((0..self.len).map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn stages_only_move_forward() {
        let k = KeyBuffer::raw(vec![1, 0, 1], Origin::Alice);
        let k = k.advance(Stage::Reconciled).unwrap();
        assert_eq!(k.stage(), Stage::Reconciled);
        assert!(matches!(k.clone().advance(Stage::Raw), Err(Error::StageOrder { .. })));
        assert!(k.clone().advance(Stage::Reconciled).is_err());
        assert_eq!(k.advance(Stage::Final).unwrap().stage(), Stage::Final);
    }

    #[test]
    fn hex_layout() {
        let h = HexBits::encode(&[1, 0, 1, 0, 0, 0, 0, 1, 1]);
        assert_eq!(h, HexBits { len: 9, hex: "a180".into() });
        assert!(HexBits { len: 20, hex: "a180".into() }.decode().is_err());
    }

    proptest! {
        #[test]
        fn hex_round_trip(bits in proptest::collection::vec(0u8..=1, 0..300)) {
            prop_assert_eq!(HexBits::encode(&bits).decode().unwrap(), bits);
        }
    }
}
