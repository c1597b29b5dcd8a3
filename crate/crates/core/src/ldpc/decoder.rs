//! Belief propagation on the Tanner graph, flooding schedule.

use super::llr::{clamp, LlrVector};
use super::{LdpcCode, LdpcError};

pub const DEFAULT_MAX_ITER: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CheckRule {
    #[default]
    SumProduct,
    MinSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BpConfig {
    pub max_iter: usize,
    pub rule: CheckRule,
}

impl Default for BpConfig {
    fn default() -> Self {
        BpConfig { max_iter: DEFAULT_MAX_ITER, rule: CheckRule::SumProduct }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeResult {
    pub bits: Vec<u8>,
    /// Zero syndrome and no undecided bit.
    pub converged: bool,
    pub iterations: usize,
}

/// Edge layout of a code, shared by every decode on it.
#[derive(Debug, Clone)]
pub struct Decoder<'a> {
    code: &'a LdpcCode,
    config: BpConfig,
    /// Row-major edge list: `row_start[r]..row_start[r+1]` are the edges of check `r`.
    row_start: Vec<usize>,
    edge_var: Vec<usize>,
    /// Edges incident to each variable, as indices into the row-major list.
    var_edges: Vec<Vec<usize>>,
}

impl<'a> Decoder<'a> {
    pub fn new(code: &'a LdpcCode, config: BpConfig) -> Self {
        let h = code.parity();
        let mut row_start = Vec::with_capacity(h.m() + 1);
        let mut edge_var = Vec::with_capacity(h.edges());
        let mut var_edges = vec![Vec::new(); h.n()];
        row_start.push(0);
        for row in h.rows() {
            for &c in row {
                var_edges[c].push(edge_var.len());
                edge_var.push(c);
            }
            row_start.push(edge_var.len());
        }
        Decoder { code, config, row_start, edge_var, var_edges }
    }

    pub fn code(&self) -> &LdpcCode {
        self.code
    }

    pub fn decode(&self, llrs: &LlrVector) -> Result<DecodeResult, LdpcError> {
        let n = self.code.n();
        if llrs.len() != n {
            return Err(LdpcError::Length { expected: n, got: llrs.len() });
        }
        let prior = llrs.values();
        let edges = self.edge_var.len();
        let mut v2c: Vec<f64> = self.edge_var.iter().map(|&v| prior[v]).collect();
        let mut c2v = vec![0.0; edges];
        let mut posterior = prior.to_vec();
        let mut bits = vec![0u8; n];
        let mut scratch = Vec::new();

        if self.hard_decision(&posterior, &mut bits) {
            return Ok(DecodeResult { bits, converged: true, iterations: 0 });
        }
        for iter in 1..=self.config.max_iter {
            for r in 0..self.row_start.len() - 1 {
                let (s, e) = (self.row_start[r], self.row_start[r + 1]);
                match self.config.rule {
                    CheckRule::SumProduct => sum_product(&v2c[s..e], &mut c2v[s..e], &mut scratch),
                    CheckRule::MinSum => min_sum(&v2c[s..e], &mut c2v[s..e]),
                }
            }
            for (v, es) in self.var_edges.iter().enumerate() {
                let total = prior[v] + es.iter().map(|&e| c2v[e]).sum::<f64>();
                posterior[v] = total;
                for &e in es {
                    v2c[e] = clamp(total - c2v[e]);
                }
            }
            if self.hard_decision(&posterior, &mut bits) {
                return Ok(DecodeResult { bits, converged: true, iterations: iter });
            }
        }
        Ok(DecodeResult { bits, converged: false, iterations: self.config.max_iter })
    }

    /// Fills `bits` and reports whether they form a codeword with every bit decided.
    fn hard_decision(&self, posterior: &[f64], bits: &mut [u8]) -> bool {
        let mut decided = true;
        for (b, &l) in bits.iter_mut().zip(posterior) {
            *b = (l < 0.0) as u8;
            decided &= l != 0.0;
        }
        decided
            && (0..self.row_start.len() - 1).all(|r| {
                self.edge_var[self.row_start[r]..self.row_start[r + 1]].iter().fold(0u8, |acc, &v| acc ^ bits[v]) == 0
            })
    }
}

/// Tanh rule with forward and backward partial products.
fn sum_product(incoming: &[f64], outgoing: &mut [f64], scratch: &mut Vec<f64>) {
    let d = incoming.len();
    scratch.clear();
    scratch.extend(incoming.iter().map(|l| (l / 2.0).tanh()));
    let mut forward = 1.0;
    for i in 0..d {
        outgoing[i] = forward;
        forward *= scratch[i];
    }
    let mut backward = 1.0;
    for i in (0..d).rev() {
        outgoing[i] = clamp(2.0 * (outgoing[i] * backward).atanh());
        backward *= scratch[i];
    }
}

fn min_sum(incoming: &[f64], outgoing: &mut [f64]) {
    let (mut min1, mut min2, mut arg) = (f64::INFINITY, f64::INFINITY, 0);
    let mut sign = 1.0;
    for (i, &l) in incoming.iter().enumerate() {
        let a = l.abs();
        if a < min1 {
            min2 = min1;
            min1 = a;
            arg = i;
        } else if a < min2 {
            min2 = a;
        }
        if l < 0.0 {
            sign = -sign;
        }
    }
    for (i, (&l, out)) in incoming.iter().zip(outgoing.iter_mut()).enumerate() {
        let mag = if i == arg { min2 } else { min1 };
        let s = if l < 0.0 { -sign } else { sign };
        *out = clamp(s * mag);
    }
}

/// Sum-product decoding with the default schedule.
pub fn decode_bp(code: &LdpcCode, llrs: &LlrVector, max_iter: usize) -> Result<DecodeResult, LdpcError> {
    Decoder::new(code, BpConfig { max_iter, rule: CheckRule::SumProduct }).decode(llrs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldpc::{bsc_llr_uniform, generate_code, known_bit_llr};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_word(code: &LdpcCode, rng: &mut impl Rng) -> Vec<u8> {
        let d: Vec<u8> = (0..code.k()).map(|_| rng.random::<bool>() as u8).collect();
        code.encode(&d).unwrap()
    }

    #[test]
    fn noiseless_word_is_returned_immediately() {
        let code = generate_code(1024, 0.5, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = random_word(&code, &mut rng);
        let res = decode_bp(&code, &bsc_llr_uniform(&t, 0.0).unwrap(), 50).unwrap();
        assert!(res.converged);
        assert!(res.iterations <= 1);
        assert_eq!(res.bits, t);
    }

    #[test]
    fn single_flip_is_corrected() {
        let code = generate_code(1024, 0.5, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let t = random_word(&code, &mut rng);
            let mut y = t.clone();
            let i = rng.random_range(0..y.len());
            y[i] ^= 1;
            let res = decode_bp(&code, &bsc_llr_uniform(&y, 0.01).unwrap(), 50).unwrap();
            assert!(res.converged);
            assert_eq!(res.bits, t);
        }
    }

    #[test]
    fn zero_llrs_do_not_converge() {
        let code = generate_code(256, 0.5, 1).unwrap();
        let res = decode_bp(&code, &LlrVector::new(vec![0.0; 256]), 20).unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 20);
    }

    #[test]
    fn min_sum_corrects_light_noise() {
        let code = generate_code(1024, 0.5, 1).unwrap();
        let dec = Decoder::new(&code, BpConfig { max_iter: 50, rule: CheckRule::MinSum });
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = random_word(&code, &mut rng);
        let mut y = t.clone();
        for i in [3, 200, 777] {
            y[i] ^= 1;
        }
        let res = dec.decode(&bsc_llr_uniform(&y, 0.01).unwrap()).unwrap();
        assert_eq!(res.bits, t);
    }

    #[test]
    fn known_checks_only_help() {
        let code = generate_code(1024, 0.5, 11).unwrap();
        let eps = 0.075;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (mut err_channel, mut err_pinned) = (0, 0);
        let dec = Decoder::new(&code, BpConfig::default());
        for _ in 0..200 {
            let t = random_word(&code, &mut rng);
            let y: Vec<u8> = t.iter().map(|b| b ^ rng.random_bool(eps) as u8).collect();
            let all = bsc_llr_uniform(&y, eps).unwrap();
            let pinned = bsc_llr_uniform(&y[..code.k()], eps).unwrap().concat(&known_bit_llr(&t[code.k()..]));
            err_channel += (dec.decode(&all).unwrap().bits != t) as u32;
            err_pinned += (dec.decode(&pinned).unwrap().bits != t) as u32;
        }
        assert!(err_pinned <= err_channel, "pinned {err_pinned} channel {err_channel}");
    }

    #[test]
    fn wrong_length_is_rejected() {
        let code = generate_code(64, 0.5, 1).unwrap();
        assert!(decode_bp(&code, &LlrVector::new(vec![1.0; 3]), 5).is_err());
    }
}
