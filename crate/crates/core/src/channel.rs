//! Binary channels with unequal symbol durations.
//!
//! A [`BinaryChannel`] is a 2×2 transition matrix `h[j][i] = P(out = j | in = i)`
//! together with the durations `w = (w0, w1)` of the two input symbols. All
//! information quantities are in bits.
//!
//! Blocks of `k` channel bits are identified with integers in `0..2^k`; the
//! first transmitted bit is the most significant one. The matcher, the block
//! weights and the block super-channel all use this convention.

use rand::Rng;
use thiserror::Error;

/// Tolerance for the simplex and stochastic-matrix checks.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Largest block length for which `2^k` tables are built.
pub const MAX_BLOCK_BITS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("invalid pmf: {0}")]
    InvalidPmf(String),
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("block length {0} out of range 1..={max}", max = MAX_BLOCK_BITS)]
    BlockLength(usize),
}

/// A probability mass function.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf(Vec<f64>);

impl Pmf {
    pub fn new(probs: Vec<f64>) -> Result<Self, ChannelError> {
        if probs.is_empty() {
            return Err(ChannelError::InvalidPmf("empty probability vector".into()));
        }
        if let Some(x) = probs.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(ChannelError::InvalidPmf(format!("entry {x} is not a probability")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(ChannelError::InvalidPmf(format!("entries sum to {sum}")));
        }
        Ok(Pmf(probs))
    }

    /// Normalizes a non-negative weight vector.
    pub fn from_weights(weights: &[f64]) -> Result<Self, ChannelError> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || weights.iter().any(|x| *x < 0.0 || !x.is_finite()) {
            return Err(ChannelError::InvalidPmf("weights must be non-negative with positive sum".into()));
        }
        Pmf::new(weights.iter().map(|x| x / sum).collect())
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform pmf over an empty alphabet");
        Pmf(vec![1.0 / n as f64; n])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    /// True when `self` puts mass only where `other` does.
    pub fn support_within(&self, other: &Pmf) -> bool {
        self.len() == other.len() && self.0.iter().zip(&other.0).all(|(p, q)| *p == 0.0 || *q > 0.0)
    }

    /// Expected cost `Σ p_i c_i`.
    pub fn expectation(&self, cost: &[f64]) -> f64 {
        self.0.iter().zip(cost).map(|(p, c)| p * c).sum()
    }
}

impl AsRef<[f64]> for Pmf {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Shannon entropy in bits.
pub fn entropy(p: &Pmf) -> f64 {
    p.0.iter().filter(|x| **x > 0.0).map(|x| -x * x.log2()).sum()
}

/// `D(q‖r)` in bits; `+inf` when `q` is not supported within `r`.
pub fn kl_divergence(q: &Pmf, r: &Pmf) -> f64 {
    assert_eq!(q.len(), r.len(), "kl_divergence over different alphabets");
    let mut d = 0.0;
    for (a, b) in q.0.iter().zip(&r.0) {
        if *a == 0.0 {
            continue;
        }
        if *b == 0.0 {
            return f64::INFINITY;
        }
        d += a * (a / b).log2();
    }
    // Rounding can push D(q‖q) a hair below zero.
    d.max(0.0)
}

/// A binary-input binary-output channel with input durations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryChannel {
    h: [[f64; 2]; 2],
    w: [f64; 2],
}

impl BinaryChannel {
    /// `h[j][i]` is the probability of output `j` given input `i`.
    pub fn new(h: [[f64; 2]; 2], w: [f64; 2]) -> Result<Self, ChannelError> {
        for i in 0..2 {
            if h.iter().any(|row| !(0.0..=1.0).contains(&row[i])) {
                return Err(ChannelError::InvalidChannel(format!("column {i} has an entry outside [0,1]")));
            }
            let col = h[0][i] + h[1][i];
            if (col - 1.0).abs() > SIMPLEX_TOL {
                return Err(ChannelError::InvalidChannel(format!("column {i} sums to {col}")));
            }
        }
        if w.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
            return Err(ChannelError::InvalidChannel(format!("durations {w:?} must be positive")));
        }
        Ok(BinaryChannel { h, w })
    }

    /// Binary symmetric channel with crossover probability `epsilon`.
    pub fn bsc(epsilon: f64, w0: f64, w1: f64) -> Result<Self, ChannelError> {
        if !(0.0..0.5).contains(&epsilon) {
            return Err(ChannelError::InvalidChannel(format!("crossover {epsilon} outside [0, 0.5)")));
        }
        BinaryChannel::new([[1.0 - epsilon, epsilon], [epsilon, 1.0 - epsilon]], [w0, w1])
    }

    pub fn transition(&self, output: usize, input: usize) -> f64 {
        self.h[output][input]
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        self.h
    }

    pub fn durations(&self) -> [f64; 2] {
        self.w
    }

    /// Same channel with the input symbols relabeled 0 ↔ 1.
    pub fn swapped_inputs(&self) -> Self {
        BinaryChannel {
            h: [[self.h[0][1], self.h[0][0]], [self.h[1][1], self.h[1][0]]],
            w: [self.w[1], self.w[0]],
        }
    }

    /// Same transition matrix, durations multiplied by `factor`.
    pub fn scaled_durations(&self, factor: f64) -> Result<Self, ChannelError> {
        BinaryChannel::new(self.h, [self.w[0] * factor, self.w[1] * factor])
    }

    /// Both inputs induce the same output distribution, so nothing gets through.
    pub fn is_useless(&self) -> bool {
        self.h[0][0] == self.h[0][1]
    }

    pub fn output_pmf(&self, p: &Pmf) -> Result<Pmf, ChannelError> {
        check_dim(p, 2)?;
        let r0 = self.h[0][0] * p.get(0) + self.h[0][1] * p.get(1);
        let r1 = self.h[1][0] * p.get(0) + self.h[1][1] * p.get(1);
        // Renormalize away rounding so the result passes the simplex check.
        let s = r0 + r1;
        Ok(Pmf(vec![r0 / s, r1 / s]))
    }

    /// `D_i = Σ_j h_ji log2(h_ji / r_j)` for each input `i`.
    pub fn input_divergences(&self, r: &Pmf) -> [f64; 2] {
        let mut d = [0.0; 2];
        for (i, di) in d.iter_mut().enumerate() {
            for j in 0..2 {
                let hji = self.h[j][i];
                if hji > 0.0 {
                    *di += hji * (hji / r.get(j)).log2();
                }
            }
        }
        d
    }

    pub fn mutual_information(&self, p: &Pmf) -> Result<f64, ChannelError> {
        let r = self.output_pmf(p)?;
        let d = self.input_divergences(&r);
        let mut total = 0.0;
        for i in 0..2 {
            if p.get(i) > 0.0 {
                total += p.get(i) * d[i];
            }
        }
        Ok(total.max(0.0))
    }

    /// Average duration `wᵀp`.
    pub fn cost(&self, p: &Pmf) -> Result<f64, ChannelError> {
        check_dim(p, 2)?;
        Ok(p.expectation(&self.w))
    }

    /// Information per unit time, `I(p) / wᵀp`.
    pub fn rate_per_cost(&self, p: &Pmf) -> Result<f64, ChannelError> {
        Ok(self.mutual_information(p)? / self.cost(p)?)
    }

    /// Mutual information of `k` independent uses of the channel driven by a
    /// joint pmf over `2^k` blocks.
    ///
    /// Cost is `O(4^k · k)`; intended for matcher block lengths up to a dozen bits.
    pub fn block_mutual_information(&self, k: usize, p: &Pmf) -> Result<f64, ChannelError> {
        check_block_len(k)?;
        let n = 1usize << k;
        check_dim(p, n)?;
        let lik = self.block_likelihoods(k);
        let mut r = vec![0.0; n];
        for (b, pb) in p.probs().iter().enumerate() {
            if *pb == 0.0 {
                continue;
            }
            for (y, ry) in r.iter_mut().enumerate() {
                *ry += pb * lik[y * n + b];
            }
        }
        let mut total = 0.0;
        for (b, pb) in p.probs().iter().enumerate() {
            if *pb == 0.0 {
                continue;
            }
            let mut db = 0.0;
            for (y, ry) in r.iter().enumerate() {
                let h = lik[y * n + b];
                if h > 0.0 {
                    db += h * (h / ry).log2();
                }
            }
            total += pb * db;
        }
        Ok(total.max(0.0))
    }

    /// Row-major `2^k × 2^k` table of `P(y | b)` for k independent uses.
    fn block_likelihoods(&self, k: usize) -> Vec<f64> {
        let n = 1usize << k;
        let mut lik = vec![1.0; n * n];
        for y in 0..n {
            for b in 0..n {
                let mut prob = 1.0;
                for t in 0..k {
                    prob *= self.h[(y >> t) & 1][(b >> t) & 1];
                }
                lik[y * n + b] = prob;
            }
        }
        lik
    }
}

/// Durations of every length-`k` input block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockWeights {
    k: usize,
    v: Vec<f64>,
}

impl BlockWeights {
    pub fn new(k: usize, w: [f64; 2]) -> Result<Self, ChannelError> {
        check_block_len(k)?;
        let v = (0..1u32 << k)
            .map(|b| {
                let ones = b.count_ones() as f64;
                (k as f64 - ones) * w[0] + ones * w[1]
            })
            .collect();
        Ok(BlockWeights { k, v })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }

    /// Average block duration `vᵀp`.
    pub fn average(&self, p: &Pmf) -> Result<f64, ChannelError> {
        check_dim(p, self.v.len())?;
        Ok(p.expectation(&self.v))
    }
}

pub fn block_weights(k: usize, w: [f64; 2]) -> Result<BlockWeights, ChannelError> {
    BlockWeights::new(k, w)
}

fn check_dim(p: &Pmf, expected: usize) -> Result<(), ChannelError> {
    if p.len() != expected {
        return Err(ChannelError::DimensionMismatch { expected, got: p.len() });
    }
    Ok(())
}

fn check_block_len(k: usize) -> Result<(), ChannelError> {
    if k == 0 || k > MAX_BLOCK_BITS {
        return Err(ChannelError::BlockLength(k));
    }
    Ok(())
}

/// Flips each bit independently with probability `epsilon`.
pub fn bsc_transmit(bits: &[u8], epsilon: f64, rng: &mut impl Rng) -> Vec<u8> {
    bits.iter().map(|b| b ^ (rng.random::<f64>() < epsilon) as u8).collect()
}

/// Binary entropy function in bits.
pub fn binary_entropy(x: f64) -> f64 {
    entropy(&Pmf(vec![x, 1.0 - x]))
}
