//! Classical post-processing: parameter estimation by disclosure, syndrome
//! reconciliation with LDPC codes, and Toeplitz privacy amplification.

mod buffer;
mod estimation;
mod keylength;
mod ldpc;
mod ledger;
mod toeplitz;

pub use buffer::{HexBits, KeyBuffer, Origin, Stage};
pub use estimation::{parameter_estimation, Estimate};
pub use keylength::{final_key_length, DEFAULT_EPSILON_MARGIN};
pub use ldpc::{reconcile, DecodeResult, ParityCheckMatrix, ReconcileOutcome};
pub use ledger::LeakageLedger;
pub use toeplitz::{toeplitz_hash, ToeplitzSeed};
