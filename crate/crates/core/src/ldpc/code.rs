use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::peg::peg_checks;
use super::{CONSTRUCTION_RETRIES, DEFAULT_COLUMN_WEIGHT};
use crate::error::contract;
use crate::{Error, Result};

type BitRow = Vec<u64>;

fn words(n: usize) -> usize {
    n.div_ceil(64)
}

fn get_bit(row: &[u64], i: usize) -> bool {
    (row[i / 64] >> (i % 64)) & 1 == 1
}

fn set_bit(row: &mut [u64], i: usize) {
    row[i / 64] |= 1 << (i % 64);
}

/// Binary linear code defined by a sparse parity-check matrix `H`.
///
/// At construction `H` is brought to reduced row-echelon form over GF(2).
/// The pivot columns carry parity bits and the remaining columns carry the
/// message, so codewords keep the column order of `H` and the message is
/// read back from fixed positions.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCode {
    n: usize,
    checks: Vec<Vec<usize>>,
    vars: Vec<Vec<usize>>,
    reduced: Vec<BitRow>,
    parity_positions: Vec<usize>,
    message_positions: Vec<usize>,
    // Edge tables for message passing, edges ordered by check.
    check_edge_start: Vec<usize>,
    edge_var: Vec<usize>,
    var_edges: Vec<Vec<usize>>,
}

impl LinearCode {
    /// Builds a code from the column indices of every check (row of `H`).
    pub fn from_checks(n: usize, checks: Vec<Vec<usize>>) -> Result<Self> {
        if n == 0 || checks.is_empty() {
            return Err(contract("parity-check matrix must be non-empty"));
        }
        let mut vars = vec![Vec::new(); n];
        for (r, row) in checks.iter().enumerate() {
            let mut sorted = row.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != row.len() {
                return Err(contract(format!("check {r} lists a column twice")));
            }
            for &c in row {
                if c >= n {
                    return Err(contract(format!("check {r} references column {c} >= {n}")));
                }
                vars[c].push(r);
            }
        }

        let w = words(n);
        let mut dense: Vec<BitRow> = checks
            .iter()
            .map(|row| {
                let mut bits = vec![0u64; w];
                for &c in row {
                    set_bit(&mut bits, c);
                }
                bits
            })
            .collect();
        let mut pivots = Vec::new();
        let mut rank = 0;
        for col in 0..n {
            let Some(p) = (rank..dense.len()).find(|&r| get_bit(&dense[r], col)) else {
                continue;
            };
            dense.swap(rank, p);
            let pivot_row = dense[rank].clone();
            for (r, row) in dense.iter_mut().enumerate() {
                if r != rank && get_bit(row, col) {
                    for (a, b) in row.iter_mut().zip(&pivot_row) {
                        *a ^= b;
                    }
                }
            }
            pivots.push(col);
            rank += 1;
            if rank == dense.len() {
                break;
            }
        }
        dense.truncate(rank);
        let message_positions = (0..n).filter(|c| !pivots.contains(c)).collect();

        let mut check_edge_start = Vec::with_capacity(checks.len() + 1);
        let mut edge_var = Vec::new();
        let mut var_edges = vec![Vec::new(); n];
        for row in &checks {
            check_edge_start.push(edge_var.len());
            for &c in row {
                var_edges[c].push(edge_var.len());
                edge_var.push(c);
            }
        }
        check_edge_start.push(edge_var.len());

        Ok(Self {
            n,
            checks,
            vars,
            reduced: dense,
            parity_positions: pivots,
            message_positions,
            check_edge_start,
            edge_var,
            var_edges,
        })
    }

    /// Regular code with column weight 3 built by progressive edge growth.
    ///
    /// Attempts with consecutive seeds until the PEG graph is complete and
    /// `H` has full rank `m`.
    pub fn build(n: usize, m: usize, seed: u64) -> Result<Self> {
        if m == 0 || m >= n {
            return Err(contract(format!("need 0 < M < N, got N = {n}, M = {m}")));
        }
        for attempt in 0..CONSTRUCTION_RETRIES {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
            let Some(checks) = peg_checks(n, m, DEFAULT_COLUMN_WEIGHT.min(m), &mut rng) else {
                continue;
            };
            let code = Self::from_checks(n, checks)?;
            if code.rank() == m {
                return Ok(code);
            }
        }
        Err(Error::Construction(format!(
            "no full-rank ({n}, {m}) PEG code after {CONSTRUCTION_RETRIES} attempts from seed {seed}"
        )))
    }

    /// Codeword length N.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of parity checks (rows of `H`).
    pub fn m(&self) -> usize {
        self.checks.len()
    }

    /// GF(2) rank of `H`.
    pub fn rank(&self) -> usize {
        self.parity_positions.len()
    }

    /// Message bits per codeword, `N - rank(H)`.
    pub fn message_len(&self) -> usize {
        self.n - self.rank()
    }

    pub fn rate(&self) -> f64 {
        self.message_len() as f64 / self.n as f64
    }

    pub fn checks(&self) -> &[Vec<usize>] {
        &self.checks
    }

    /// Rows of `H` incident to every column.
    pub fn vars(&self) -> &[Vec<usize>] {
        &self.vars
    }

    pub fn message_positions(&self) -> &[usize] {
        &self.message_positions
    }

    pub fn column_weights(&self) -> Vec<usize> {
        self.vars.iter().map(Vec::len).collect()
    }

    pub fn row_weights(&self) -> Vec<usize> {
        self.checks.iter().map(Vec::len).collect()
    }

    pub(crate) fn edges(&self) -> (&[usize], &[usize], &[Vec<usize>]) {
        (&self.check_edge_start, &self.edge_var, &self.var_edges)
    }

    /// Systematic encoding: message bits land on the message positions and
    /// each parity bit is solved from its row of the reduced `H`.
    pub fn encode(&self, message: &[u8]) -> Result<Vec<u8>> {
        if message.len() != self.message_len() {
            return Err(contract(format!(
                "message of {} bits, code expects {}",
                message.len(),
                self.message_len()
            )));
        }
        let mut word = vec![0u64; words(self.n)];
        for (&pos, &b) in self.message_positions.iter().zip(message) {
            if b & 1 == 1 {
                set_bit(&mut word, pos);
            }
        }
        for (row, &pos) in self.reduced.iter().zip(&self.parity_positions) {
            let parity = row.iter().zip(&word).map(|(a, b)| (a & b).count_ones()).sum::<u32>() & 1;
            if parity == 1 {
                set_bit(&mut word, pos);
            }
        }
        Ok((0..self.n).map(|i| get_bit(&word, i) as u8).collect())
    }

    pub fn extract_message(&self, codeword: &[u8]) -> Vec<u8> {
        self.message_positions.iter().map(|&p| codeword[p]).collect()
    }

    /// True when every check of `H` is satisfied.
    pub fn is_codeword(&self, bits: &[u8]) -> bool {
        bits.len() == self.n
            && self
                .checks
                .iter()
                .all(|row| row.iter().fold(0u8, |acc, &c| acc ^ (bits[c] & 1)) == 0)
    }
}
