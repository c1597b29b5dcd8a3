//! Geometric Huffman Coding and prefix-free matcher codes.
//!
//! [`ghc`] returns the dyadic pmf `d` minimizing `D(d‖p)`. It works like
//! Huffman's algorithm on the target pmf: the two smallest entries
//! `p_a ≥ p_b` are merged into `2·√(p_a·p_b)`, unless `p_a ≥ 4·p_b`, in which
//! case `p_b` (with its whole subtree) is dropped and receives probability
//! zero. The depth of each surviving leaf is its codeword length.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;

use ordered_float::OrderedFloat;
use thiserror::Error;

use crate::capacity::CapacityResult;
use crate::channel::{block_weights, entropy, kl_divergence, BinaryChannel, ChannelError, Pmf};

/// Entries of the target pmf below `2^-32` never receive a codeword.
pub const MIN_TARGET_PROB: f64 = 1.0 / 4_294_967_296.0;

/// Longest source word a [`MatcherCode`] can hold.
pub const MAX_WORD_LEN: u32 = 64;

/// Largest block length accepted by [`joint_pmf`].
pub const MAX_JOINT_BITS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GhcError {
    #[error("codeword lengths violate Kraft equality")]
    NotKraftComplete,
    #[error("pmf over {got} blocks does not match block length {k} ({expected} blocks)")]
    Dimension { k: usize, expected: usize, got: usize },
    #[error("block {block} out of range for k = {k}")]
    BlockOutOfRange { block: u32, k: usize },
    #[error("block {0} has more than one source word")]
    DuplicateBlock(u32),
    #[error("source word {0} is a prefix of another word")]
    NotPrefixFree(String),
    #[error("source words do not cover every bit sequence")]
    Incomplete,
    #[error("source word of length {0} exceeds {max}", max = MAX_WORD_LEN)]
    WordTooLong(u32),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// A pmf whose nonzero entries are `2^-ℓ_i`, stored by exponent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DyadicPmf {
    lengths: Vec<Option<u32>>,
}

impl DyadicPmf {
    /// `None` marks a zero-probability entry.
    pub fn from_lengths(lengths: Vec<Option<u32>>) -> Result<Self, GhcError> {
        if !kraft_complete(&lengths) {
            return Err(GhcError::NotKraftComplete);
        }
        Ok(DyadicPmf { lengths })
    }

    pub fn uniform(k: usize) -> Self {
        DyadicPmf { lengths: vec![Some(k as u32); 1 << k] }
    }

    pub fn lengths(&self) -> &[Option<u32>] {
        &self.lengths
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.lengths[i].map_or(0.0, |l| (-(l as f64)).exp2())
    }

    pub fn to_pmf(&self) -> Pmf {
        let probs = (0..self.len()).map(|i| self.prob(i)).collect();
        Pmf::new(probs).expect("Kraft-complete lengths sum to one")
    }

    /// Sorted multiset of codeword lengths over the support.
    pub fn length_profile(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.lengths.iter().flatten().copied().collect();
        v.sort_unstable();
        v
    }
}

/// Exact check that `Σ 2^-ℓ_i = 1`, carried out on per-length counts.
pub fn kraft_complete(lengths: &[Option<u32>]) -> bool {
    let Some(max) = lengths.iter().flatten().max().copied() else {
        return false;
    };
    let mut counts = vec![0u64; max as usize + 1];
    for l in lengths.iter().flatten() {
        counts[*l as usize] += 1;
    }
    let mut carry = 0u64;
    for l in (1..=max as usize).rev() {
        let total = counts[l] + carry;
        if total % 2 != 0 {
            return false;
        }
        carry = total / 2;
    }
    counts[0] + carry == 1
}

/// iid product pmf of `k` symbols, indexed MSB-first.
///
/// Each entry is `p0^zeros · p1^ones`, so blocks of equal weight get
/// bit-identical probabilities.
pub fn joint_pmf(p: &Pmf, k: usize) -> Result<Pmf, GhcError> {
    if p.len() != 2 {
        return Err(ChannelError::DimensionMismatch { expected: 2, got: p.len() }.into());
    }
    if k == 0 || k > MAX_JOINT_BITS {
        return Err(ChannelError::BlockLength(k).into());
    }
    let probs: Vec<f64> = (0..1u32 << k)
        .map(|b| {
            let ones = b.count_ones() as i32;
            p.get(0).powi(k as i32 - ones) * p.get(1).powi(ones)
        })
        .collect();
    // Renormalize only the rounding; the exact sum is one.
    let s: f64 = probs.iter().sum();
    Ok(Pmf::new(probs.into_iter().map(|x| x / s).collect())?)
}

enum Node {
    Leaf(usize),
    Pair(usize, usize),
}

/// Dyadic pmf minimizing `D(d‖p)`.
///
/// Ties between equal probabilities go to the lower index; merged nodes are
/// indexed after all leaves, in creation order.
pub fn ghc(p: &Pmf) -> DyadicPmf {
    let n = p.len();
    let mut nodes: Vec<Node> = Vec::with_capacity(2 * n);
    let mut heap = BinaryHeap::new();
    for (i, &x) in p.probs().iter().enumerate() {
        if x >= MIN_TARGET_PROB {
            nodes.push(Node::Leaf(i));
            heap.push(Reverse((OrderedFloat(x), i, nodes.len() - 1)));
        }
    }
    if heap.is_empty() {
        // Only reachable for huge alphabets with every entry below the cap.
        let best = p
            .probs()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let mut lengths = vec![None; n];
        lengths[best] = Some(0);
        return DyadicPmf { lengths };
    }

    let mut next_id = n;
    while heap.len() > 1 {
        let Reverse((pb, _, b)) = heap.pop().unwrap();
        let Reverse((pa, ida, a)) = heap.pop().unwrap();
        if pa.0 >= 4.0 * pb.0 {
            heap.push(Reverse((pa, ida, a)));
        } else {
            nodes.push(Node::Pair(a, b));
            heap.push(Reverse((OrderedFloat(2.0 * (pa.0 * pb.0).sqrt()), next_id, nodes.len() - 1)));
            next_id += 1;
        }
    }

    let Reverse((_, _, root)) = heap.pop().unwrap();
    let mut lengths = vec![None; n];
    let mut stack = vec![(root, 0u32)];
    while let Some((node, depth)) = stack.pop() {
        match nodes[node] {
            Node::Leaf(i) => lengths[i] = Some(depth),
            Node::Pair(a, b) => {
                stack.push((a, depth + 1));
                stack.push((b, depth + 1));
            }
        }
    }
    DyadicPmf { lengths }
}

/// A source word of the matcher: up to 64 bits, first bit most significant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SourceWord {
    bits: u64,
    len: u32,
}

impl SourceWord {
    pub fn new(bits: u64, len: u32) -> Self {
        assert!(len <= MAX_WORD_LEN);
        let mask = if len == 64 { u64::MAX } else { (1u64 << len) - 1 };
        SourceWord { bits: bits & mask, len }
    }

    pub fn len(&self) -> u32 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Bit `i`, counted from the first transmitted bit.
    pub fn bit(&self, i: u32) -> u8 {
        ((self.bits >> (self.len - 1 - i)) & 1) as u8
    }

    pub fn bits(&self) -> impl Iterator<Item = u8> + '_ {
        (0..self.len).map(|i| self.bit(i))
    }
}

impl std::str::FromStr for SourceWord {
    type Err = GhcError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() as u32 > MAX_WORD_LEN {
            return Err(GhcError::WordTooLong(s.len() as u32));
        }
        let mut bits = 0u64;
        for c in s.chars() {
            bits = (bits << 1)
                | match c {
                    '0' => 0,
                    '1' => 1,
                    _ => return Err(GhcError::NotPrefixFree(s.to_string())),
                };
        }
        Ok(SourceWord { bits, len: s.len() as u32 })
    }
}

impl fmt::Display for SourceWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bits() {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TrieNode {
    Branch([u32; 2]),
    Leaf(u32),
    Empty,
}

/// Bijection between a full prefix-free set of source words and `k`-bit blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatcherCode {
    k: usize,
    entries: Vec<(SourceWord, u32)>,
    block_pmf: DyadicPmf,
    by_block: Vec<Option<SourceWord>>,
    trie: Vec<TrieNode>,
}

impl MatcherCode {
    pub fn from_entries(k: usize, mut entries: Vec<(SourceWord, u32)>) -> Result<Self, GhcError> {
        if k == 0 || k > crate::channel::MAX_BLOCK_BITS {
            return Err(ChannelError::BlockLength(k).into());
        }
        let n = 1usize << k;
        let mut by_block = vec![None; n];
        for (word, block) in &entries {
            if *block as usize >= n {
                return Err(GhcError::BlockOutOfRange { block: *block, k });
            }
            if by_block[*block as usize].replace(*word).is_some() {
                return Err(GhcError::DuplicateBlock(*block));
            }
        }
        let lengths: Vec<Option<u32>> = by_block.iter().map(|w| w.map(|w| w.len())).collect();
        let trie = build_trie(&entries)?;
        let block_pmf = DyadicPmf::from_lengths(lengths)?;
        entries.sort_by_key(|(_, b)| *b);
        Ok(MatcherCode { k, entries, block_pmf, by_block, trie })
    }

    /// Every block is its own source word.
    pub fn identity(k: usize) -> Self {
        build_matcher_code(&DyadicPmf::uniform(k), k).expect("uniform code is complete")
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `(source word, block)` pairs ordered by block.
    pub fn entries(&self) -> &[(SourceWord, u32)] {
        &self.entries
    }

    pub fn block_pmf(&self) -> &DyadicPmf {
        &self.block_pmf
    }

    pub fn word_for(&self, block: u32) -> Option<SourceWord> {
        self.by_block.get(block as usize).copied().flatten()
    }

    pub fn min_word_len(&self) -> u32 {
        self.entries.iter().map(|(w, _)| w.len()).min().unwrap_or(0)
    }

    /// Average source bits per block, `Σ d_i ℓ_i = H(d)`.
    pub fn mean_word_len(&self) -> f64 {
        entropy(&self.block_pmf.to_pmf())
    }

    /// Walks the parse tree; `next` yields source bits, `None` on exhaustion.
    /// Returns the block and the number of bits read, or `None` if the input
    /// ran out mid-word.
    pub(crate) fn parse_one(&self, mut next: impl FnMut() -> Option<u8>) -> Option<(u32, usize)> {
        let mut node = 0usize;
        let mut read = 0;
        loop {
            match self.trie[node] {
                TrieNode::Leaf(block) => return Some((block, read)),
                TrieNode::Branch(children) => {
                    let bit = next()?;
                    read += 1;
                    node = children[bit as usize] as usize;
                }
                TrieNode::Empty => unreachable!("complete trie"),
            }
        }
    }

    /// One line per entry, `<source_word> <block_bits>`, ordered by block.
    pub fn table(&self) -> String {
        let mut out = String::new();
        for (word, block) in &self.entries {
            out.push_str(&format!("{word} {:0width$b}\n", block, width = self.k));
        }
        out
    }
}

impl fmt::Display for MatcherCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.table())
    }
}

fn build_trie(entries: &[(SourceWord, u32)]) -> Result<Vec<TrieNode>, GhcError> {
    let mut trie = vec![TrieNode::Empty];
    for (word, block) in entries {
        if word.len() > MAX_WORD_LEN {
            return Err(GhcError::WordTooLong(word.len()));
        }
        let mut node = 0usize;
        for i in 0..word.len() {
            let bit = word.bit(i) as usize;
            node = match trie[node] {
                TrieNode::Leaf(_) => return Err(GhcError::NotPrefixFree(word.to_string())),
                TrieNode::Empty => {
                    let a = trie.len() as u32;
                    trie.push(TrieNode::Empty);
                    trie.push(TrieNode::Empty);
                    trie[node] = TrieNode::Branch([a, a + 1]);
                    (a + bit as u32) as usize
                }
                TrieNode::Branch(children) => children[bit] as usize,
            };
        }
        if trie[node] != TrieNode::Empty {
            return Err(GhcError::NotPrefixFree(word.to_string()));
        }
        trie[node] = TrieNode::Leaf(*block);
    }
    if trie.iter().any(|n| *n == TrieNode::Empty) {
        return Err(GhcError::Incomplete);
    }
    Ok(trie)
}

/// Canonical prefix-free code realizing `d` on `k`-bit blocks.
///
/// Blocks are sorted by (length, index) and receive consecutive canonical
/// codewords; zero-probability blocks get no entry.
pub fn build_matcher_code(d: &DyadicPmf, k: usize) -> Result<MatcherCode, GhcError> {
    if k == 0 || k > crate::channel::MAX_BLOCK_BITS {
        return Err(ChannelError::BlockLength(k).into());
    }
    let expected = 1usize << k;
    if d.len() != expected {
        return Err(GhcError::Dimension { k, expected, got: d.len() });
    }
    let mut order: Vec<(u32, u32)> =
        d.lengths().iter().enumerate().filter_map(|(b, l)| l.map(|l| (l, b as u32))).collect();
    order.sort_unstable();
    if let Some(&(l, _)) = order.last() {
        if l > MAX_WORD_LEN {
            return Err(GhcError::WordTooLong(l));
        }
    }
    let mut entries = Vec::with_capacity(order.len());
    let mut code: u64 = 0;
    let mut prev_len = order.first().map_or(0, |(l, _)| *l);
    for (i, (len, block)) in order.into_iter().enumerate() {
        if i > 0 {
            code += 1;
            code <<= len - prev_len;
        }
        prev_len = len;
        entries.push((SourceWord::new(code, len), block));
    }
    MatcherCode::from_entries(k, entries)
}

/// GHC matcher for `k` consecutive symbols drawn iid from `p`.
pub fn matcher_for(p: &Pmf, k: usize) -> Result<MatcherCode, GhcError> {
    let target = joint_pmf(p, k)?;
    build_matcher_code(&ghc(&target), k)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedRate {
    /// `I(p) / vᵀp` for the block pmf on the k-use super-channel.
    pub mi_rate: f64,
    /// `H(p) / vᵀp`.
    pub entropy_rate: f64,
    /// `D(p‖p*ᵏ) / vᵀp`.
    pub penalty_bound: f64,
}

pub fn matched_rate(code: &MatcherCode, ch: &BinaryChannel, cap: &CapacityResult) -> Result<MatchedRate, GhcError> {
    let k = code.k();
    let p = code.block_pmf().to_pmf();
    let cost = block_weights(k, ch.durations())?.average(&p)?;
    let mi = ch.block_mutual_information(k, &p)?;
    let target = joint_pmf(&cap.p_star, k)?;
    Ok(MatchedRate {
        mi_rate: mi / cost,
        entropy_rate: entropy(&p) / cost,
        penalty_bound: kl_divergence(&p, &target) / cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::capacity;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pmf(v: &[f64]) -> Pmf {
        Pmf::new(v.to_vec()).unwrap()
    }

    fn eq7_code() -> MatcherCode {
        let e = |w: &str, b| (w.parse::<SourceWord>().unwrap(), b);
        MatcherCode::from_entries(2, vec![e("1", 0b00), e("01", 0b01), e("001", 0b10), e("000", 0b11)]).unwrap()
    }

    #[test]
    fn kraft_checks() {
        assert!(kraft_complete(&[Some(1), Some(2), Some(3), Some(3)]));
        assert!(kraft_complete(&[Some(0), None]));
        assert!(!kraft_complete(&[Some(1), Some(2), Some(3)]));
        assert!(!kraft_complete(&[Some(1), Some(1), Some(1)]));
        assert!(!kraft_complete(&[None, None]));
        assert!(DyadicPmf::from_lengths(vec![Some(1), Some(2)]).is_err());
    }

    #[test]
    fn joint_pmf_examples() {
        let j = joint_pmf(&Pmf::uniform(2), 2).unwrap();
        assert!(j.probs().iter().all(|x| (*x - 0.25).abs() < 1e-15));
        let j = joint_pmf(&pmf(&[0.8, 0.2]), 2).unwrap();
        for (a, b) in j.probs().iter().zip([0.64, 0.16, 0.16, 0.04]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(joint_pmf(&pmf(&[0.8, 0.2]), 0).is_err());
        assert!(joint_pmf(&pmf(&[0.8, 0.2]), 17).is_err());

        let ch = BinaryChannel::bsc(0.02, 1.0, 5.0).unwrap();
        let j = joint_pmf(&capacity(&ch).unwrap().p_star, 4).unwrap();
        assert_eq!(j.len(), 16);
        let heaviest = (0..16).max_by(|a, b| j.get(*a).total_cmp(&j.get(*b))).unwrap();
        assert_eq!(heaviest, 0);
        // Equal-weight blocks tie exactly.
        assert_eq!(j.get(0b0111), j.get(0b1110));
    }

    #[test]
    fn ghc_keeps_dyadic_targets() {
        let p = pmf(&[0.5, 0.25, 0.125, 0.125]);
        let d = ghc(&p);
        assert_eq!(d.lengths(), &[Some(1), Some(2), Some(3), Some(3)]);
        assert_eq!(kl_divergence(&d.to_pmf(), &p), 0.0);
    }

    #[test]
    fn ghc_drops_tiny_entries() {
        let d = ghc(&pmf(&[0.9, 0.1]));
        // 0.9 ≥ 4·0.1, so the small symbol is dropped.
        assert_eq!(d.lengths(), &[Some(0), None]);
        let d = ghc(&pmf(&[0.7, 0.3, 0.0]));
        assert_eq!(d.lengths(), &[Some(1), Some(1), None]);
    }

    #[test]
    fn ghc_single_symbol() {
        assert_eq!(ghc(&pmf(&[1.0])).lengths(), &[Some(0)]);
    }

    #[test]
    fn eq7_code_generates_its_pmf() {
        let code = eq7_code();
        assert_eq!(code.block_pmf().lengths(), &[Some(1), Some(2), Some(3), Some(3)]);
        assert_eq!(code.table(), "1 00\n01 01\n001 10\n000 11\n");
    }

    #[test]
    fn canonical_code_for_eq7_pmf() {
        let d = DyadicPmf::from_lengths(vec![Some(1), Some(2), Some(3), Some(3)]).unwrap();
        let code = build_matcher_code(&d, 2).unwrap();
        let lens: Vec<u32> = code.entries().iter().map(|(w, _)| w.len()).collect();
        assert_eq!(lens, vec![1, 2, 3, 3]);
        assert_eq!(code.table(), "0 00\n10 01\n110 10\n111 11\n");
    }

    #[test]
    fn uniform_pmf_gives_identity_code() {
        for k in 1..=5 {
            let code = MatcherCode::identity(k);
            for (w, b) in code.entries() {
                assert_eq!(w.len() as usize, k);
                assert_eq!(w.bits, *b as u64);
            }
        }
    }

    #[test]
    fn build_rejects_dimension_mismatch() {
        let d = DyadicPmf::uniform(2);
        assert!(matches!(build_matcher_code(&d, 3), Err(GhcError::Dimension { .. })));
    }

    #[test]
    fn from_entries_validation() {
        let e = |w: &str, b| (w.parse::<SourceWord>().unwrap(), b);
        assert!(matches!(
            MatcherCode::from_entries(2, vec![e("1", 0), e("10", 1), e("0", 2)]),
            Err(GhcError::NotPrefixFree(_))
        ));
        assert!(matches!(
            MatcherCode::from_entries(2, vec![e("1", 0), e("01", 1)]),
            Err(GhcError::Incomplete)
        ));
        assert!(matches!(
            MatcherCode::from_entries(2, vec![e("1", 0), e("0", 0)]),
            Err(GhcError::DuplicateBlock(0))
        ));
        assert!(matches!(
            MatcherCode::from_entries(1, vec![e("1", 0), e("0", 2)]),
            Err(GhcError::BlockOutOfRange { .. })
        ));
    }

    #[test]
    fn fig3_lengths_at_two_percent() {
        let ch = BinaryChannel::bsc(0.02, 1.0, 5.0).unwrap();
        let cap = capacity(&ch).unwrap();
        let d = ghc(&joint_pmf(&cap.p_star, 4).unwrap());
        let lens: Vec<u32> = d.lengths().iter().map(|l| l.unwrap()).collect();
        assert_eq!(lens, vec![2, 3, 3, 5, 3, 5, 5, 7, 3, 5, 5, 6, 5, 6, 6, 7]);
        let code = build_matcher_code(&d, 4).unwrap();
        assert_eq!(code.table().lines().count(), 16);
    }

    #[test]
    fn matched_rate_examples() {
        let ch = BinaryChannel::bsc(0.02, 1.0, 5.0).unwrap();
        let cap = capacity(&ch).unwrap();
        let id = MatcherCode::identity(1);
        let r = matched_rate(&id, &ch, &cap).unwrap();
        assert!((r.mi_rate - ch.rate_per_cost(&Pmf::uniform(2)).unwrap()).abs() < 1e-15);

        let fig3 = matcher_for(&cap.p_star, 4).unwrap();
        let r4 = matched_rate(&fig3, &ch, &cap).unwrap();
        assert!(r4.mi_rate / cap.capacity >= 0.99);
        assert!(r4.penalty_bound > 0.0);
        assert!(r4.penalty_bound < r.penalty_bound);
        assert!(cap.capacity - r4.mi_rate <= r4.penalty_bound + 1e-12);
    }

    #[test]
    fn matched_rate_zero_penalty_for_dyadic_optimum() {
        // A channel whose optimal input is (1/2, 1/2) with k = 1.
        let ch = BinaryChannel::bsc(0.1, 1.0, 1.0).unwrap();
        let cap = capacity(&ch).unwrap();
        let r = matched_rate(&MatcherCode::identity(1), &ch, &cap).unwrap();
        assert!(r.penalty_bound < 1e-20);
        assert!((r.mi_rate - cap.capacity).abs() < 1e-12);
    }

    #[test]
    fn ghc_codes_are_complete_for_random_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let n = rng.random_range(1..=64);
            let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>().powi(3)).collect();
            let p = Pmf::from_weights(&w).unwrap();
            let d = ghc(&p);
            assert!(kraft_complete(d.lengths()));
            for (i, l) in d.lengths().iter().enumerate() {
                if p.get(i) == 0.0 {
                    assert!(l.is_none());
                }
            }
        }
    }
}
