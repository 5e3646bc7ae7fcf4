//! Columnar CSV for trial records.
//!
//! ```text
//! alice_phase,alice_bit,alice_basis,bob_basis,sample,verdict
//! 2,0,q,q,-0.8713301,bit0
//! ```
//!
//! `alice_phase` is the phase in units of π/2 (0..=3), bases are `q`/`p`,
//! `sample` is in shot-noise units and `verdict` is one of `bit0`, `bit1`,
//! `inconclusive`, `unsifted`.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::gaussian::{Basis, SymbolPhase};

use super::{TrialRecord, Verdict};

pub const RECORDS_CSV_HEADER: &str = "alice_phase,alice_bit,alice_basis,bob_basis,sample,verdict";

pub fn write_records_csv<W: Write>(mut out: W, records: &[TrialRecord]) -> Result<()> {
    writeln!(out, "{RECORDS_CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.alice_phase.index(),
            r.alice_bit,
            r.alice_basis.as_char(),
            r.bob_basis.as_char(),
            r.sample,
            r.verdict.token()
        )?;
    }
    Ok(())
}

pub fn read_records_csv<R: BufRead>(input: R) -> Result<Vec<TrialRecord>> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != RECORDS_CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            reason: format!("expected header `{RECORDS_CSV_HEADER}`"),
        });
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 2;
        let bad = |reason: &str| Error::Parse {
            line: lineno,
            reason: reason.to_string(),
        };
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 6 {
            return Err(bad("expected 6 fields"));
        }
        let phase: usize = fields[0].parse().map_err(|_| bad("bad alice_phase"))?;
        if phase > 3 {
            return Err(bad("alice_phase must be 0..=3"));
        }
        let bit: u8 = fields[1].parse().map_err(|_| bad("bad alice_bit"))?;
        let basis = |s: &str| match s {
            "q" => Ok(Basis::Q),
            "p" => Ok(Basis::P),
            _ => Err(bad("basis must be q or p")),
        };
        let verdict = match fields[5] {
            "bit0" => Verdict::Bit0,
            "bit1" => Verdict::Bit1,
            "inconclusive" => Verdict::Inconclusive,
            "unsifted" => Verdict::Unsifted,
            _ => return Err(bad("unknown verdict")),
        };
        out.push(TrialRecord {
            alice_phase: SymbolPhase::from_index(phase),
            alice_bit: bit,
            alice_basis: basis(fields[2])?,
            bob_basis: basis(fields[3])?,
            sample: fields[4].parse().map_err(|_| bad("bad sample"))?,
            verdict,
        });
    }
    Ok(out)
}
