//! Seeded progressive-edge-growth construction of column-regular codes.
//!
//! Variable nodes are processed in order. The first edge of a node goes to a
//! check of minimum degree. Each further edge goes to a check that the
//! current graph cannot reach from the node, or failing that to one reached
//! only at the deepest breadth-first level, which keeps local cycles long.
//! Ties break on lowest check degree, then uniformly at random.

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{make_systematic, LdpcCode, LdpcError, ParityMatrix};

/// Default column degree for generated codes.
pub const DEFAULT_COLUMN_DEGREE: usize = 3;

const FULL_RANK_ATTEMPTS: u64 = 64;

/// `m × n` matrix with every column of weight `dv` and row weights within one of each other.
pub fn peg_regular(n: usize, m: usize, dv: usize, seed: u64) -> Result<ParityMatrix, LdpcError> {
    if n == 0 || m == 0 || m >= n || dv == 0 || dv > m {
        return Err(LdpcError::Parameters(format!("cannot build {m}x{n} matrix with column degree {dv}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_row = (n * dv).div_ceil(m);
    let mut var_adj: Vec<Vec<usize>> = vec![Vec::with_capacity(dv); n];
    let mut chk_adj: Vec<Vec<usize>> = vec![Vec::with_capacity(max_row); m];

    // Per-search scratch: stamp marks membership in the current BFS.
    let mut chk_seen = vec![usize::MAX; m];
    let mut var_seen = vec![usize::MAX; n];
    let mut stamp = 0usize;
    let mut candidates = Vec::new();

    for v in 0..n {
        for _ in 0..dv {
            candidates.clear();
            if var_adj[v].is_empty() {
                candidates.extend(0..m);
            } else {
                stamp += 1;
                let mut frontier_vars = vec![v];
                var_seen[v] = stamp;
                let mut reached = 0usize;
                loop {
                    let mut level = Vec::new();
                    for &u in &frontier_vars {
                        for &c in &var_adj[u] {
                            if chk_seen[c] != stamp {
                                chk_seen[c] = stamp;
                                level.push(c);
                            }
                        }
                    }
                    if level.is_empty() {
                        candidates.extend((0..m).filter(|c| chk_seen[*c] != stamp));
                        break;
                    }
                    reached += level.len();
                    if reached == m {
                        // Everything reachable: take the checks first seen at the deepest level.
                        candidates.extend(level.iter().copied().filter(|c| !var_adj[v].contains(c)));
                        break;
                    }
                    let mut next = Vec::new();
                    for &c in &level {
                        for &u in &chk_adj[c] {
                            if var_seen[u] != stamp {
                                var_seen[u] = stamp;
                                next.push(u);
                            }
                        }
                    }
                    frontier_vars = next;
                }
            }
            candidates.retain(|c| chk_adj[*c].len() < max_row && !var_adj[v].contains(c));
            if candidates.is_empty() {
                candidates.extend((0..m).filter(|c| chk_adj[*c].len() < max_row && !var_adj[v].contains(c)));
            }
            if candidates.is_empty() {
                candidates.extend((0..m).filter(|c| !var_adj[v].contains(c)));
            }
            let min_deg = candidates.iter().map(|c| chk_adj[*c].len()).min().expect("dv <= m");
            candidates.retain(|c| chk_adj[*c].len() == min_deg);
            let &c = candidates.choose(&mut rng).expect("nonempty");
            var_adj[v].push(c);
            chk_adj[c].push(v);
        }
    }
    ParityMatrix::from_rows(n, chk_adj)
}

/// Number of data bits for a generated code: `n·rate` rounded to a multiple of 8.
pub fn data_bits_for(n: usize, rate: f64) -> usize {
    ((n as f64 * rate / 8.0).round() as usize) * 8
}

/// Systematic PEG code of length `n` and column degree 3.
///
/// Seeds derived from `seed` are tried until the matrix has full row rank.
pub fn generate_code(n: usize, rate: f64, seed: u64) -> Result<LdpcCode, LdpcError> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(LdpcError::Parameters(format!("rate {rate} outside (0, 1)")));
    }
    let k = data_bits_for(n, rate);
    if k == 0 || k >= n {
        return Err(LdpcError::Parameters(format!("length {n} at rate {rate} leaves no data or no checks")));
    }
    let m = n - k;
    let mut last = None;
    for attempt in 0..FULL_RANK_ATTEMPTS {
        let h = peg_regular(n, m, DEFAULT_COLUMN_DEGREE.min(m), seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15)))?;
        match make_systematic(&h) {
            Ok(code) => return Ok(code),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one attempt"))
}
