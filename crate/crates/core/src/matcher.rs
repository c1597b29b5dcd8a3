//! Streaming matcher and dematcher.
//!
//! The matcher parses an equiprobable bit stream with the source words of a
//! [`MatcherCode`] and emits the corresponding `k`-bit blocks; the dematcher
//! concatenates source words back. Dematching is only ever applied to
//! hard-decided blocks after decoding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::channel::Pmf;
use crate::ghc::MatcherCode;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatchError {
    #[error("bit stream exhausted after {emitted} blocks")]
    Underrun { emitted: usize },
    #[error("block {0} has no source word")]
    InvalidBlock(u32),
    #[error("{len} bits do not split into {k}-bit blocks")]
    Framing { len: usize, k: usize },
}

/// What happens when the matcher reads past the end of a [`BitStream`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Padding {
    #[default]
    Error,
    /// Append seeded pseudo-random bits on demand.
    Equiprobable(u64),
}

/// A bit sequence with a read cursor.
///
/// Padding bits generated on exhaustion are appended to the stream, so the
/// consumed prefix always contains everything the matcher has read.
#[derive(Debug, Clone)]
pub struct BitStream {
    bits: Vec<u8>,
    pos: usize,
    pad: Option<ChaCha8Rng>,
    padded: usize,
}

impl BitStream {
    pub fn new(bits: Vec<u8>) -> Self {
        debug_assert!(bits.iter().all(|b| *b <= 1));
        BitStream { bits, pos: 0, pad: None, padded: 0 }
    }

    pub fn with_padding(bits: Vec<u8>, padding: Padding) -> Self {
        let mut s = BitStream::new(bits);
        if let Padding::Equiprobable(seed) = padding {
            s.pad = Some(ChaCha8Rng::seed_from_u64(seed));
        }
        s
    }

    /// `n` iid equiprobable bits.
    pub fn random(n: usize, rng: &mut impl Rng) -> Self {
        BitStream::new(random_bits(n, rng))
    }

    pub fn read_bit(&mut self) -> Option<u8> {
        if self.pos == self.bits.len() {
            let rng = self.pad.as_mut()?;
            self.bits.push(rng.random::<bool>() as u8);
            self.padded += 1;
        }
        let b = self.bits[self.pos];
        self.pos += 1;
        Some(b)
    }

    /// Inserts `bits` at the cursor so they are read next.
    pub fn prepend(&mut self, bits: &[u8]) {
        self.bits.splice(self.pos..self.pos, bits.iter().copied());
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.bits.len() - self.pos
    }

    pub fn consumed(&self) -> &[u8] {
        &self.bits[..self.pos]
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn into_bits(self) -> Vec<u8> {
        self.bits
    }

    /// Number of padding bits generated so far.
    pub fn padded(&self) -> usize {
        self.padded
    }
}

pub fn random_bits(n: usize, rng: &mut impl Rng) -> Vec<u8> {
    (0..n).map(|_| rng.random::<bool>() as u8).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchOutput {
    pub blocks: Vec<u32>,
    pub consumed: usize,
}

/// Parses `n_blocks` source words from `stream`.
///
/// On underrun the cursor is restored to where it was on entry.
pub fn match_stream(stream: &mut BitStream, code: &MatcherCode, n_blocks: usize) -> Result<MatchOutput, MatchError> {
    let start = stream.pos;
    let mut blocks = Vec::with_capacity(n_blocks);
    for emitted in 0..n_blocks {
        match code.parse_one(|| stream.read_bit()) {
            Some((block, _)) => blocks.push(block),
            None => {
                stream.pos = start;
                return Err(MatchError::Underrun { emitted });
            }
        }
    }
    Ok(MatchOutput { blocks, consumed: stream.pos - start })
}

/// Concatenated source words of `blocks`.
pub fn dematch(blocks: &[u32], code: &MatcherCode) -> Result<BitStream, MatchError> {
    let mut out = Vec::new();
    for &b in blocks {
        let word = code.word_for(b).ok_or(MatchError::InvalidBlock(b))?;
        out.extend(word.bits());
    }
    Ok(BitStream::new(out))
}

/// Serializes blocks MSB-first.
pub fn blocks_to_bits(blocks: &[u32], k: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(blocks.len() * k);
    for &b in blocks {
        for t in (0..k).rev() {
            out.push(((b >> t) & 1) as u8);
        }
    }
    out
}

pub fn bits_to_blocks(bits: &[u8], k: usize) -> Result<Vec<u32>, MatchError> {
    if k == 0 || bits.len() % k != 0 {
        return Err(MatchError::Framing { len: bits.len(), k });
    }
    Ok(bits
        .chunks(k)
        .map(|c| c.iter().fold(0u32, |acc, b| (acc << 1) | *b as u32))
        .collect())
}

/// Monte Carlo block frequencies when the matcher is fed iid equiprobable bits.
pub fn empirical_block_pmf(code: &MatcherCode, n_samples: usize, seed: u64) -> Pmf {
    assert!(n_samples >= 1, "at least one sample required");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; 1 << code.k()];
    for _ in 0..n_samples {
        let (block, _) = code.parse_one(|| Some(rng.random::<bool>() as u8)).expect("infinite source");
        counts[block as usize] += 1;
    }
    let w: Vec<f64> = counts.iter().map(|c| *c as f64).collect();
    Pmf::from_weights(&w).expect("non-empty counts")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::capacity;
    use crate::channel::BinaryChannel;
    use crate::ghc::{ghc, build_matcher_code, matcher_for, SourceWord};
    use proptest::prelude::*;

    fn eq7_code() -> MatcherCode {
        let e = |w: &str, b| (w.parse::<SourceWord>().unwrap(), b);
        MatcherCode::from_entries(2, vec![e("1", 0b00), e("01", 0b01), e("001", 0b10), e("000", 0b11)]).unwrap()
    }

    fn bits(s: &str) -> Vec<u8> {
        s.bytes().map(|c| c - b'0').collect()
    }

    fn fig3_code() -> MatcherCode {
        let ch = BinaryChannel::bsc(0.02, 1.0, 5.0).unwrap();
        matcher_for(&capacity(&ch).unwrap().p_star, 4).unwrap()
    }

    #[test]
    fn worked_example_matches() {
        let code = eq7_code();
        let mut s = BitStream::new(bits("101001"));
        let out = match_stream(&mut s, &code, 3).unwrap();
        assert_eq!(out.blocks, vec![0b00, 0b01, 0b10]);
        assert_eq!(out.consumed, 6);
        assert_eq!(blocks_to_bits(&out.blocks, 2), bits("000110"));
    }

    #[test]
    fn worked_example_dematches() {
        let code = eq7_code();
        assert_eq!(dematch(&[0b00, 0b01, 0b10], &code).unwrap().bits(), bits("101001").as_slice());
        assert!(dematch(&[], &code).unwrap().bits().is_empty());
    }

    #[test]
    fn single_flip_desynchronizes() {
        let code = eq7_code();
        let received = bits_to_blocks(&bits("010110"), 2).unwrap();
        let out = dematch(&received, &code).unwrap();
        assert_eq!(out.bits(), bits("0101001").as_slice());
        assert_ne!(out.bits().len(), 6);
    }

    #[test]
    fn identity_matcher_passes_bits_through() {
        let code = MatcherCode::identity(1);
        let input = bits("1101000111");
        let mut s = BitStream::new(input.clone());
        let out = match_stream(&mut s, &code, 10).unwrap();
        assert_eq!(out.consumed, 10);
        assert_eq!(blocks_to_bits(&out.blocks, 1), input);
    }

    #[test]
    fn all_ones_uses_shortest_word() {
        let code = eq7_code();
        let mut s = BitStream::new(vec![1; 8]);
        let out = match_stream(&mut s, &code, 8).unwrap();
        assert!(out.blocks.iter().all(|b| *b == 0));
        assert_eq!(out.consumed, 8);
    }

    #[test]
    fn underrun_restores_cursor() {
        let code = eq7_code();
        let mut s = BitStream::new(bits("1010"));
        assert_eq!(match_stream(&mut s, &code, 3), Err(MatchError::Underrun { emitted: 2 }));
        assert_eq!(s.position(), 0);
    }

    #[test]
    fn padding_extends_stream() {
        let code = eq7_code();
        let mut s = BitStream::with_padding(bits("1"), Padding::Equiprobable(9));
        let out = match_stream(&mut s, &code, 20).unwrap();
        assert!(s.padded() > 0);
        assert_eq!(out.consumed, s.consumed().len());
        let back = dematch(&out.blocks, &code).unwrap();
        assert_eq!(back.bits(), s.consumed());
    }

    #[test]
    fn prepend_is_read_first() {
        let mut s = BitStream::new(bits("0011"));
        s.read_bit();
        s.prepend(&bits("11"));
        assert_eq!(s.bits(), bits("011011").as_slice());
        assert_eq!(s.read_bit(), Some(1));
    }

    #[test]
    fn invalid_block_is_rejected() {
        let d = ghc(&Pmf::new(vec![0.9, 0.1]).unwrap());
        let code = build_matcher_code(&d, 1).unwrap();
        assert_eq!(dematch(&[1], &code).unwrap_err(), MatchError::InvalidBlock(1));
    }

    #[test]
    fn framing_errors() {
        assert!(bits_to_blocks(&[0, 1, 1], 2).is_err());
        assert_eq!(bits_to_blocks(&bits("0111"), 4).unwrap(), vec![0b0111]);
    }

    /// Three standard deviations of a binomial frequency, plus slack for the
    /// number of entries checked.
    fn within_3_sigma(empirical: &Pmf, target: &Pmf, n: usize) {
        for (e, t) in empirical.probs().iter().zip(target.probs()) {
            let sigma = (t * (1.0 - t) / n as f64).sqrt();
            assert!((e - t).abs() <= 3.0 * sigma + 1e-12, "empirical {e} vs {t}");
        }
    }

    #[test]
    fn empirical_pmf_of_eq7_code() {
        let n = 1_000_000;
        let e = empirical_block_pmf(&eq7_code(), n, 1);
        within_3_sigma(&e, &Pmf::new(vec![0.5, 0.25, 0.125, 0.125]).unwrap(), n);
    }

    #[test]
    fn empirical_pmf_of_identity_is_uniform() {
        let n = 200_000;
        let e = empirical_block_pmf(&MatcherCode::identity(3), n, 2);
        within_3_sigma(&e, &Pmf::uniform(8), n);
    }

    #[test]
    fn empirical_pmf_of_fig3_code() {
        let n = 1_000_000;
        let code = fig3_code();
        let e = empirical_block_pmf(&code, n, 3);
        within_3_sigma(&e, &code.block_pmf().to_pmf(), n);
    }

    #[test]
    fn mean_consumption_is_dyadic_entropy() {
        let code = fig3_code();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 100_000;
        let mut s = BitStream::random(n * 8, &mut rng);
        let out = match_stream(&mut s, &code, n).unwrap();
        let mean = out.consumed as f64 / n as f64;
        assert!((mean / code.mean_word_len() - 1.0).abs() < 0.01);
    }

    fn arb_code() -> impl Strategy<Value = MatcherCode> {
        (1usize..=4, prop::collection::vec(0.0..1.0f64, 16), any::<u64>()).prop_map(|(k, w, _)| {
            let w: Vec<f64> = w[..1 << k].iter().map(|x| x * x + 1e-3).collect();
            let d = ghc(&Pmf::from_weights(&w).unwrap());
            build_matcher_code(&d, k).unwrap()
        })
    }

    proptest! {
        #[test]
        fn round_trip(code in arb_code(), seed in any::<u64>(), n in 1usize..64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = BitStream::random(n * 16, &mut rng);
            let original = s.bits().to_vec();
            let out = match_stream(&mut s, &code, n).unwrap();
            let back = dematch(&out.blocks, &code).unwrap();
            prop_assert_eq!(back.bits(), &original[..out.consumed]);
        }

        #[test]
        fn prefix_monotone(code in arb_code(), seed in any::<u64>(), extra in 1usize..64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let base = random_bits(200, &mut rng);
            let mut longer = base.clone();
            longer.extend(random_bits(extra, &mut rng));
            let n = 10;
            let a = match_stream(&mut BitStream::new(base), &code, n);
            let b = match_stream(&mut BitStream::new(longer), &code, n + 5);
            if let (Ok(a), Ok(b)) = (a, b) {
                prop_assert_eq!(&a.blocks[..], &b.blocks[..n]);
            }
        }
    }
}
