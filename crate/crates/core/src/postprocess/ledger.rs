use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

/// Public information revealed during post-processing, in bits, plus block
/// bookkeeping. Merging is associative and commutative.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakageLedger {
    pub disclosed_bits: u64,
    pub syndrome_bits: u64,
    pub verification_bits: u64,
    pub hash_seed_bits: u64,
    pub blocks_attempted: u64,
    pub blocks_failed: u64,
}

impl LeakageLedger {
    /// Bits that carry information about the key itself (the Toeplitz seed
    /// is public but independent of the key).
    pub fn key_leakage(&self) -> u64 {
        self.disclosed_bits + self.syndrome_bits + self.verification_bits
    }

    pub fn block_success_rate(&self) -> f64 {
        if self.blocks_attempted == 0 {
            return 0.0;
        }
        (self.blocks_attempted - self.blocks_failed) as f64 / self.blocks_attempted as f64
    }
}

impl Add for LeakageLedger {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            disclosed_bits: self.disclosed_bits + o.disclosed_bits,
            syndrome_bits: self.syndrome_bits + o.syndrome_bits,
            verification_bits: self.verification_bits + o.verification_bits,
            hash_seed_bits: self.hash_seed_bits + o.hash_seed_bits,
            blocks_attempted: self.blocks_attempted + o.blocks_attempted,
            blocks_failed: self.blocks_failed + o.blocks_failed,
        }
    }
}

impl AddAssign for LeakageLedger {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl std::iter::Sum for LeakageLedger {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ledger() -> impl Strategy<Value = LeakageLedger> {
        (0u64..1000, 0u64..1000, 0u64..100, 0u64..1000, 1u64..10).prop_map(|(d, s, v, h, a)| LeakageLedger {
            disclosed_bits: d,
            syndrome_bits: s,
            verification_bits: v,
            hash_seed_bits: h,
            blocks_attempted: a,
            blocks_failed: a / 2,
        })
    }

    proptest! {
        #[test]
        fn merge_is_associative(a in ledger(), b in ledger(), c in ledger()) {
            prop_assert_eq!((a + b) + c, a + (b + c));
            prop_assert_eq!(a + b, b + a);
        }
    }
}
