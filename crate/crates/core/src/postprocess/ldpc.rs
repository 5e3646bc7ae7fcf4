//! Regular LDPC codes and belief-propagation syndrome decoding.
//!
//! Text format for parity-check matrices:
//!
//! ```text
//! ldpc <n> <m> <col_weight> <row_weight>
//! <sorted column indices of row 0, space separated>
//! ...
//! <sorted column indices of row m-1>
//! ```
//!
//! Lines starting with `#` are comments.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

use super::{KeyBuffer, Stage};

const MAX_CONSTRUCTION_ATTEMPTS: usize = 200;
const LLR_CLAMP: f64 = 40.0;

/// Sparse binary `m × n` parity-check matrix with uniform row and column
/// weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityCheckMatrix {
    n: usize,
    rows: Vec<Vec<u32>>,
    cols: Vec<Vec<u32>>,
    col_weight: usize,
    row_weight: usize,
}

impl ParityCheckMatrix {
    /// Random `(col_weight, row_weight)`-regular code of length `n` with no
    /// 4-cycles. Columns are attached one at a time to the checks with the
    /// most free sockets, skipping any check that already shares a column
    /// with one chosen for this column; a dead end restarts the draw.
    pub fn regular<R: Rng + ?Sized>(n: usize, col_weight: usize, row_weight: usize, rng: &mut R) -> Result<Self> {
        if col_weight < 2 || row_weight <= col_weight {
            return Err(Error::invalid("ldpc weights", "need 2 <= col_weight < row_weight"));
        }
        if n == 0 || (n * col_weight) % row_weight != 0 {
            return Err(Error::invalid(
                "ldpc length",
                format!("n·col_weight must be a positive multiple of row_weight (n = {n})"),
            ));
        }
        let m = n * col_weight / row_weight;
        for _ in 0..MAX_CONSTRUCTION_ATTEMPTS {
            if let Some(rows) = try_construct(n, m, col_weight, row_weight, rng) {
                return Self::from_rows(n, rows);
            }
        }
        Err(Error::invalid(
            "ldpc length",
            format!("no 4-cycle-free ({col_weight},{row_weight}) code found for n = {n}"),
        ))
    }

    /// Builds a matrix from explicit rows; every row and column weight must
    /// be uniform.
    pub fn from_rows(n: usize, mut rows: Vec<Vec<u32>>) -> Result<Self> {
        let m = rows.len();
        if m == 0 || m >= n {
            return Err(Error::invalid("ldpc shape", format!("need 0 < m < n, got m = {m}, n = {n}")));
        }
        let mut cols = vec![Vec::new(); n];
        for (j, row) in rows.iter_mut().enumerate() {
            row.sort_unstable();
            if row.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::invalid("ldpc rows", format!("row {j} repeats a column")));
            }
            for &c in row.iter() {
                let c = c as usize;
                if c >= n {
                    return Err(Error::invalid("ldpc rows", format!("row {j} column {c} >= n")));
                }
                cols[c].push(j as u32);
            }
        }
        let row_weight = rows[0].len();
        let col_weight = cols[0].len();
        if rows.iter().any(|r| r.len() != row_weight) || cols.iter().any(|c| c.len() != col_weight) {
            return Err(Error::invalid("ldpc rows", "row and column weights must be uniform"));
        }
        Ok(Self {
            n,
            rows,
            cols,
            col_weight,
            row_weight,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn col_weight(&self) -> usize {
        self.col_weight
    }

    pub fn row_weight(&self) -> usize {
        self.row_weight
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    pub fn rate(&self) -> f64 {
        1.0 - self.m() as f64 / self.n as f64
    }

    pub fn syndrome(&self, bits: &[u8]) -> Vec<u8> {
        self.rows
            .iter()
            .map(|row| row.iter().fold(0u8, |acc, &c| acc ^ bits[c as usize]))
            .collect()
    }

    /// True if two columns share two or more checks.
    pub fn has_four_cycles(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        for col in &self.cols {
            for (a, &r1) in col.iter().enumerate() {
                for &r2 in &col[a + 1..] {
                    let pair = (r1.min(r2), r1.max(r2));
                    if !seen.insert(pair) {
                        return true;
                    }
                }
            }
        }
        false
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "ldpc {} {} {} {}", self.n, self.m(), self.col_weight, self.row_weight)?;
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(u32::to_string).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input
            .lines()
            .enumerate()
            .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim_start().starts_with('#')));
        let parse_err = |line: usize, reason: &str| Error::Parse {
            line: line + 1,
            reason: reason.to_string(),
        };
        let (hl, header) = lines.next().ok_or_else(|| parse_err(0, "empty input"))?;
        let header = header?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 || fields[0] != "ldpc" {
            return Err(parse_err(hl, "expected `ldpc <n> <m> <col_weight> <row_weight>`"));
        }
        let nums: Vec<usize> = fields[1..]
            .iter()
            .map(|f| f.parse().map_err(|_| parse_err(hl, "bad header number")))
            .collect::<Result<_>>()?;
        let (n, m, cw, rw) = (nums[0], nums[1], nums[2], nums[3]);
        let mut rows = Vec::with_capacity(m);
        for (ln, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<u32> = line
                .split_whitespace()
                .map(|f| f.parse().map_err(|_| parse_err(ln, "bad column index")))
                .collect::<Result<_>>()?;
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(parse_err(ln, "column indices must be strictly increasing"));
            }
            rows.push(row);
        }
        if rows.len() != m {
            return Err(parse_err(hl, &format!("header says {m} rows, found {}", rows.len())));
        }
        let h = Self::from_rows(n, rows)?;
        if h.col_weight != cw || h.row_weight != rw {
            return Err(parse_err(hl, "weights disagree with header"));
        }
        Ok(h)
    }

    /// Sum-product decoding towards the codeword whose syndrome is
    /// `target`, starting from `received` over a binary symmetric channel
    /// with the given crossover probability.
    pub fn decode(&self, received: &[u8], target: &[u8], crossover: f64, max_iters: usize) -> DecodeResult {
        assert_eq!(received.len(), self.n);
        assert_eq!(target.len(), self.m());
        if self.syndrome(received) == target {
            return DecodeResult {
                bits: received.to_vec(),
                iterations: 0,
                success: true,
            };
        }
        let p = crossover.clamp(1e-6, 0.5 - 1e-6);
        let prior = ((1.0 - p) / p).ln();
        let channel: Vec<f64> = received
            .iter()
            .map(|&b| if b == 0 { prior } else { -prior })
            .collect();

        // edge e of row j is rows[j][k]; edge_of_col lists (edge, row) per column
        let row_start: Vec<usize> = std::iter::once(0)
            .chain(self.rows.iter().scan(0, |acc, r| {
                *acc += r.len();
                Some(*acc)
            }))
            .collect();
        let n_edges = row_start[self.m()];
        let mut edge_col = vec![0usize; n_edges];
        let mut col_edges: Vec<Vec<usize>> = vec![Vec::with_capacity(self.col_weight); self.n];
        for (j, row) in self.rows.iter().enumerate() {
            for (k, &c) in row.iter().enumerate() {
                let e = row_start[j] + k;
                edge_col[e] = c as usize;
                col_edges[c as usize].push(e);
            }
        }

        let mut v2c: Vec<f64> = edge_col.iter().map(|&c| channel[c]).collect();
        let mut c2v = vec![0.0; n_edges];
        let mut hard = received.to_vec();
        let mut tanh_buf = Vec::with_capacity(self.row_weight);
        let mut prefix = Vec::with_capacity(self.row_weight + 1);

        for iter in 1..=max_iters {
            for j in 0..self.m() {
                let edges = row_start[j]..row_start[j + 1];
                tanh_buf.clear();
                tanh_buf.extend(v2c[edges.clone()].iter().map(|&l| (0.5 * l).tanh()));
                prefix.clear();
                prefix.push(1.0);
                for &t in &tanh_buf {
                    let last = *prefix.last().unwrap();
                    prefix.push(last * t);
                }
                let sign = if target[j] == 1 { -1.0 } else { 1.0 };
                let mut suffix = 1.0;
                for (k, e) in edges.enumerate().rev() {
                    let prod = (sign * prefix[k] * suffix).clamp(-1.0 + 1e-15, 1.0 - 1e-15);
                    c2v[e] = (2.0 * prod.atanh()).clamp(-LLR_CLAMP, LLR_CLAMP);
                    suffix *= tanh_buf[k];
                }
            }
            for (c, edges) in col_edges.iter().enumerate() {
                let total = channel[c] + edges.iter().map(|&e| c2v[e]).sum::<f64>();
                hard[c] = (total < 0.0) as u8;
                for &e in edges {
                    v2c[e] = (total - c2v[e]).clamp(-LLR_CLAMP, LLR_CLAMP);
                }
            }
            if self.syndrome(&hard) == target {
                return DecodeResult {
                    bits: hard,
                    iterations: iter,
                    success: true,
                };
            }
        }
        DecodeResult {
            bits: hard,
            iterations: max_iters,
            success: false,
        }
    }
}

fn try_construct<R: Rng + ?Sized>(n: usize, m: usize, cw: usize, rw: usize, rng: &mut R) -> Option<Vec<Vec<u32>>> {
    let mut capacity = vec![rw; m];
    let mut rows: Vec<Vec<u32>> = vec![Vec::with_capacity(rw); m];
    // rows already sharing a column with a given row
    let mut neighbours: Vec<Vec<u32>> = vec![Vec::new(); m];
    let mut order: Vec<u32> = (0..m as u32).collect();
    let mut chosen: Vec<u32> = Vec::with_capacity(cw);
    for c in 0..n {
        order.shuffle(rng);
        order.sort_by_key(|&r| std::cmp::Reverse(capacity[r as usize]));
        chosen.clear();
        for &r in &order {
            if capacity[r as usize] == 0 {
                break;
            }
            if chosen.iter().any(|&s| neighbours[s as usize].contains(&r)) {
                continue;
            }
            chosen.push(r);
            if chosen.len() == cw {
                break;
            }
        }
        if chosen.len() < cw {
            return None;
        }
        for (i, &r) in chosen.iter().enumerate() {
            capacity[r as usize] -= 1;
            rows[r as usize].push(c as u32);
            for &s in &chosen[i + 1..] {
                neighbours[r as usize].push(s);
                neighbours[s as usize].push(r);
            }
        }
    }
    Some(rows)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeResult {
    pub bits: Vec<u8>,
    pub iterations: usize,
    pub success: bool,
}

/// Result of one reconciliation block. A failed block is discarded; the
/// syndrome has still been published.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReconcileOutcome {
    Success {
        key: KeyBuffer,
        iterations: usize,
        leaked_bits: usize,
    },
    Failure {
        iterations: usize,
        leaked_bits: usize,
    },
}

impl ReconcileOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, ReconcileOutcome::Success { .. })
    }

    pub fn leaked_bits(&self) -> usize {
        match self {
            ReconcileOutcome::Success { leaked_bits, .. } | ReconcileOutcome::Failure { leaked_bits, .. } => {
                *leaked_bits
            }
        }
    }
}

/// Corrects `key` so that its syndrome under `h` matches the reference
/// party's `syndrome`. Leakage is the `m` syndrome bits.
pub fn reconcile(
    key: &KeyBuffer,
    syndrome: &[u8],
    h: &ParityCheckMatrix,
    crossover: f64,
    max_iters: usize,
) -> Result<ReconcileOutcome> {
    if key.len() != h.n() {
        return Err(Error::LengthMismatch {
            expected: h.n(),
            actual: key.len(),
        });
    }
    if syndrome.len() != h.m() {
        return Err(Error::LengthMismatch {
            expected: h.m(),
            actual: syndrome.len(),
        });
    }
    let result = h.decode(key.bits(), syndrome, crossover, max_iters);
    let leaked_bits = h.m();
    Ok(if result.success {
        ReconcileOutcome::Success {
            key: key.replace_bits(result.bits).advance(Stage::Reconciled)?,
            iterations: result.iterations,
            leaked_bits,
        }
    } else {
        ReconcileOutcome::Failure {
            iterations: result.iterations,
            leaked_bits,
        }
    })
}
