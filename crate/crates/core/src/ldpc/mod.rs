//! Systematic binary LDPC codes.
//!
//! A [`ParityMatrix`] is the sparse parity-check matrix as loaded or
//! generated. [`make_systematic`] permutes its columns so that a codeword is
//! `[data (K bits) | checks (M bits)]` and precomputes the dense map from
//! data to checks.

pub mod alist;
pub mod construct;
pub mod decoder;
pub mod gf2;
pub mod llr;

use thiserror::Error;

use gf2::BitMatrix;

pub use alist::{parse_alist, write_alist, AlistError};
pub use construct::{generate_code, peg_regular};
pub use decoder::{decode_bp, BpConfig, CheckRule, DecodeResult, Decoder};
pub use llr::{bsc_llr_matched, bsc_llr_uniform, known_bit_llr, LlrVector, LLR_MAX};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LdpcError {
    #[error("parity-check matrix has rank {rank} < {rows} rows")]
    RankDeficient { rank: usize, rows: usize },
    #[error("expected {expected} bits, got {got}")]
    Length { expected: usize, got: usize },
    #[error("invalid code parameters: {0}")]
    Parameters(String),
    #[error("crossover probability {0} outside [0, 0.5)")]
    Crossover(f64),
    #[error("prior {0:?} must be positive on both symbols")]
    DegeneratePrior([f64; 2]),
    #[error(transparent)]
    Alist(#[from] AlistError),
}

/// Sparse binary matrix stored by rows and by columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityMatrix {
    n: usize,
    rows: Vec<Vec<usize>>,
    cols: Vec<Vec<usize>>,
}

impl ParityMatrix {
    /// `rows[r]` lists the columns with a one in row `r`.
    pub fn from_rows(n: usize, rows: Vec<Vec<usize>>) -> Result<Self, LdpcError> {
        let mut cols = vec![Vec::new(); n];
        for (r, row) in rows.iter().enumerate() {
            for &c in row {
                if c >= n {
                    return Err(LdpcError::Parameters(format!("column {c} out of range in row {r}")));
                }
                if cols[c].last() == Some(&r) {
                    return Err(LdpcError::Parameters(format!("duplicate entry ({r}, {c})")));
                }
                cols[c].push(r);
            }
        }
        let mut rows = rows;
        for row in &mut rows {
            row.sort_unstable();
        }
        Ok(ParityMatrix { n, rows, cols })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn cols(&self) -> &[Vec<usize>] {
        &self.cols
    }

    pub fn edges(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn to_dense(&self) -> BitMatrix {
        let mut m = BitMatrix::zeros(self.m(), self.n);
        for (r, row) in self.rows.iter().enumerate() {
            for &c in row {
                m.set(r, c, true);
            }
        }
        m
    }

    pub fn rank(&self) -> usize {
        self.to_dense().rank()
    }

    /// Checks whose parity is violated by `word`.
    pub fn syndrome(&self, word: &[u8]) -> Vec<u8> {
        self.rows.iter().map(|row| row.iter().fold(0u8, |acc, &c| acc ^ word[c])).collect()
    }

    pub fn is_codeword(&self, word: &[u8]) -> bool {
        word.len() == self.n && self.rows.iter().all(|row| row.iter().fold(0u8, |acc, &c| acc ^ word[c]) == 0)
    }

    /// Same matrix with column `new` taken from column `order[new]`.
    pub fn permute_columns(&self, order: &[usize]) -> ParityMatrix {
        let mut inverse = vec![0; self.n];
        for (new, &old) in order.iter().enumerate() {
            inverse[old] = new;
        }
        let rows = self.rows.iter().map(|row| row.iter().map(|&c| inverse[c]).collect()).collect();
        ParityMatrix::from_rows(self.n, rows).expect("permutation preserves validity")
    }

    /// Keeps a maximal set of linearly independent rows.
    pub fn drop_redundant_rows(&self) -> ParityMatrix {
        let mut dense = BitMatrix::zeros(self.n, self.m());
        // Transposed elimination: independent rows of H are pivot columns of Hᵀ.
        for (r, row) in self.rows.iter().enumerate() {
            for &c in row {
                dense.set(c, r, true);
            }
        }
        let mut keep: Vec<usize> = dense.reduce(0..self.m()).into_iter().map(|(_, c)| c).collect();
        keep.sort_unstable();
        let rows = keep.into_iter().map(|r| self.rows[r].clone()).collect();
        ParityMatrix::from_rows(self.n, rows).expect("subset of valid rows")
    }
}

/// A systematic LDPC code: codewords are `[data | checks]`.
#[derive(Debug, Clone)]
pub struct LdpcCode {
    parity: ParityMatrix,
    /// `column_order[i]` is the column of the source matrix placed at position `i`.
    column_order: Vec<usize>,
    /// Row `r` selects the data bits summed into check bit `r`.
    check_map: BitMatrix,
    k: usize,
}

/// Permutes columns so the last `M` are invertible and precomputes the encoder.
///
/// Pivots are searched from the rightmost column, so a matrix whose trailing
/// columns already form an invertible block keeps its column order.
pub fn make_systematic(h: &ParityMatrix) -> Result<LdpcCode, LdpcError> {
    let (n, m) = (h.n(), h.m());
    let mut dense = h.to_dense();
    let pivots = dense.reduce((0..n).rev());
    if pivots.len() < m {
        return Err(LdpcError::RankDeficient { rank: pivots.len(), rows: m });
    }
    let mut is_pivot = vec![false; n];
    for &(_, c) in &pivots {
        is_pivot[c] = true;
    }
    let data_cols: Vec<usize> = (0..n).filter(|c| !is_pivot[*c]).collect();
    let mut check_rows: Vec<(usize, usize)> = pivots.iter().map(|&(r, c)| (c, r)).collect();
    check_rows.sort_unstable();

    let k = n - m;
    let mut check_map = BitMatrix::zeros(m, k);
    for (i, &(_, row)) in check_rows.iter().enumerate() {
        for (j, &c) in data_cols.iter().enumerate() {
            if dense.get(row, c) {
                check_map.set(i, j, true);
            }
        }
    }
    let column_order: Vec<usize> = data_cols.iter().copied().chain(check_rows.iter().map(|(c, _)| *c)).collect();
    Ok(LdpcCode { parity: h.permute_columns(&column_order), column_order, check_map, k })
}

impl LdpcCode {
    pub fn n(&self) -> usize {
        self.parity.n()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.parity.m()
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n() as f64
    }

    /// Parity-check matrix in codeword column order.
    pub fn parity(&self) -> &ParityMatrix {
        &self.parity
    }

    pub fn column_order(&self) -> &[usize] {
        &self.column_order
    }

    /// The `M` check bits for `data`.
    pub fn checks(&self, data: &[u8]) -> Result<Vec<u8>, LdpcError> {
        if data.len() != self.k {
            return Err(LdpcError::Length { expected: self.k, got: data.len() });
        }
        let packed = gf2::pack(data);
        Ok((0..self.m()).map(|r| gf2::dot(self.check_map.row(r), &packed)).collect())
    }

    /// `data ++ checks`.
    pub fn encode(&self, data: &[u8]) -> Result<Vec<u8>, LdpcError> {
        let mut word = data.to_vec();
        word.extend(self.checks(data)?);
        Ok(word)
    }
}

pub fn encode(code: &LdpcCode, data: &[u8]) -> Result<Vec<u8>, LdpcError> {
    code.encode(data)
}
