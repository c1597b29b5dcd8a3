//! MacKay's alist format.
//!
//! ```text
//! N M
//! max_col_degree max_row_degree
//! <N column degrees>
//! <M row degrees>
//! <N lines: 1-based row indices of each column>
//! <M lines: 1-based column indices of each row>
//! ```
//!
//! Adjacency lines may be padded with zeros up to the maximum degree.

use std::fmt::Write;

use thiserror::Error;

use super::ParityMatrix;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlistError {
    #[error("malformed header: {0}")]
    Header(String),
    #[error("inconsistent degrees: {0}")]
    Degrees(String),
    #[error("index {index} out of bounds 1..={bound} in {what}")]
    IndexOutOfBounds { index: usize, bound: usize, what: String },
    #[error("row and column lists disagree: {0}")]
    CrossValidation(String),
    #[error("not a number: {0:?}")]
    Token(String),
}

fn numbers(line: &str) -> Result<Vec<usize>, AlistError> {
    line.split_whitespace().map(|t| t.parse().map_err(|_| AlistError::Token(t.to_string()))).collect()
}

pub fn parse_alist(text: &[u8]) -> Result<ParityMatrix, AlistError> {
    let text = std::str::from_utf8(text).map_err(|_| AlistError::Header("not UTF-8".into()))?;
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let mut header_line = |what: &str, expected: usize| -> Result<Vec<usize>, AlistError> {
        let line = lines.next().ok_or_else(|| AlistError::Header(format!("missing {what}")))?;
        let v = numbers(line)?;
        if v.len() != expected {
            return Err(AlistError::Header(format!("{what}: expected {expected} values, found {}", v.len())));
        }
        Ok(v)
    };

    let dims = header_line("dimensions", 2)?;
    let (n, m) = (dims[0], dims[1]);
    if n == 0 || m == 0 {
        return Err(AlistError::Header(format!("empty matrix {n}x{m}")));
    }
    let maxes = header_line("maximum degrees", 2)?;
    let col_deg = header_line("column degrees", n)?;
    let row_deg = header_line("row degrees", m)?;
    if col_deg.iter().max() != Some(&maxes[0]) || row_deg.iter().max() != Some(&maxes[1]) {
        return Err(AlistError::Degrees("maximum degrees do not match the degree lists".into()));
    }
    if col_deg.iter().sum::<usize>() != row_deg.iter().sum::<usize>() {
        return Err(AlistError::Degrees("column and row degrees count different numbers of ones".into()));
    }

    let body: Vec<&str> = lines.collect();
    let (cols, rows) = if body.len() == n + m {
        let cols = adjacency(&body[..n], &col_deg, m, "column")?;
        let rows = adjacency(&body[n..], &row_deg, n, "row")?;
        (cols, rows)
    } else {
        // Free-form token layout: padded or unpadded, decided by the count.
        let tokens: Vec<usize> = numbers(&body.join(" "))?;
        let ones: usize = col_deg.iter().sum();
        let padded = if tokens.len() == 2 * ones {
            false
        } else if tokens.len() == n * maxes[0] + m * maxes[1] {
            true
        } else {
            return Err(AlistError::Degrees(format!("adjacency section has {} entries", tokens.len())));
        };
        let mut it = tokens.into_iter();
        let mut take = |degs: &[usize], width: usize, bound: usize, what: &str| {
            degs.iter()
                .enumerate()
                .map(|(i, &d)| {
                    let chunk: Vec<usize> = it.by_ref().take(if padded { width } else { d }).collect();
                    to_indices(&chunk, d, bound, &format!("{what} {}", i + 1))
                })
                .collect::<Result<Vec<_>, _>>()
        };
        let cols = take(&col_deg, maxes[0], m, "column")?;
        let rows = take(&row_deg, maxes[1], n, "row")?;
        (cols, rows)
    };

    // Every (row, column) pair must appear in both lists.
    let mut from_cols: Vec<(usize, usize)> =
        cols.iter().enumerate().flat_map(|(c, rs)| rs.iter().map(move |&r| (r, c))).collect();
    let mut from_rows: Vec<(usize, usize)> =
        rows.iter().enumerate().flat_map(|(r, cs)| cs.iter().map(move |&c| (r, c))).collect();
    from_cols.sort_unstable();
    from_rows.sort_unstable();
    if from_cols != from_rows {
        let diff = from_cols
            .iter()
            .zip(&from_rows)
            .find(|(a, b)| a != b)
            .map(|(a, _)| *a)
            .or_else(|| from_cols.last().copied())
            .unwrap_or((0, 0));
        return Err(AlistError::CrossValidation(format!("entry (row {}, column {})", diff.0 + 1, diff.1 + 1)));
    }
    if from_rows.windows(2).any(|w| w[0] == w[1]) {
        return Err(AlistError::CrossValidation("repeated entry".into()));
    }

    ParityMatrix::from_rows(n, rows).map_err(|e| AlistError::CrossValidation(e.to_string()))
}

fn adjacency(lines: &[&str], degs: &[usize], bound: usize, what: &str) -> Result<Vec<Vec<usize>>, AlistError> {
    lines
        .iter()
        .zip(degs)
        .enumerate()
        .map(|(i, (line, &d))| to_indices(&numbers(line)?, d, bound, &format!("{what} {}", i + 1)))
        .collect()
}

/// Drops padding zeros and converts to 0-based indices.
fn to_indices(raw: &[usize], degree: usize, bound: usize, what: &str) -> Result<Vec<usize>, AlistError> {
    let idx: Vec<usize> = raw.iter().copied().filter(|v| *v != 0).collect();
    if idx.len() != degree {
        return Err(AlistError::Degrees(format!("{what} lists {} entries, degree is {degree}", idx.len())));
    }
    idx.into_iter()
        .map(|v| {
            if v > bound {
                Err(AlistError::IndexOutOfBounds { index: v, bound, what: what.to_string() })
            } else {
                Ok(v - 1)
            }
        })
        .collect()
}

/// Serializes `h` with zero padding to the maximum degrees.
pub fn write_alist(h: &ParityMatrix) -> String {
    let col_deg: Vec<usize> = h.cols().iter().map(Vec::len).collect();
    let row_deg: Vec<usize> = h.rows().iter().map(Vec::len).collect();
    let max_c = col_deg.iter().copied().max().unwrap_or(0);
    let max_r = row_deg.iter().copied().max().unwrap_or(0);
    let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    let mut out = String::new();
    writeln!(out, "{} {}", h.n(), h.m()).unwrap();
    writeln!(out, "{max_c} {max_r}").unwrap();
    writeln!(out, "{}", join(&col_deg)).unwrap();
    writeln!(out, "{}", join(&row_deg)).unwrap();
    let padded = |adj: &[usize], width: usize| {
        let mut v: Vec<usize> = adj.iter().map(|x| x + 1).collect();
        v.resize(width, 0);
        join(&v)
    };
    for col in h.cols() {
        writeln!(out, "{}", padded(col, max_c)).unwrap();
    }
    for row in h.rows() {
        writeln!(out, "{}", padded(row, max_r)).unwrap();
    }
    out
}
