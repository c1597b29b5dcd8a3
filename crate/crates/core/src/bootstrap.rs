//! Bootstrap chaining: check bits of each block are fed back into the
//! matcher and ride in matched form inside the next block.
//!
//! Round `i < B` matches `K` bits from the stream, encodes them and inserts
//! the `M` check bits at the head of the stream. Only the `K` matched bits of
//! these rounds are transmitted. The final round uses the sparse-dense code
//! `(M', K')`: its `K'` matched bits are followed by `M'` unmatched ur-bits.
//! Blocks go on the channel in reverse order, final block first.

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{block_weights, bsc_transmit, entropy, BinaryChannel, ChannelError, Pmf};
use crate::ghc::{DyadicPmf, GhcError, MatcherCode};
use crate::ldpc::{bsc_llr_matched, bsc_llr_uniform, known_bit_llr, BpConfig, Decoder, LdpcCode, LdpcError, LlrVector};
use crate::matcher::{bits_to_blocks, blocks_to_bits, dematch, match_stream, BitStream, MatchError, Padding};
use crate::sim::trial_rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BootstrapError {
    #[error("invalid bootstrap configuration: {0}")]
    Config(String),
    #[error("effective rate {0} is negative: the code rate cannot sustain check-bit recycling")]
    NegativeRate(f64),
    #[error("expected {expected} received words, got {got}")]
    WordCount { expected: usize, got: usize },
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Ldpc(#[from] LdpcError),
    #[error(transparent)]
    Ghc(#[from] GhcError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Debug, Clone)]
pub struct BootstrapConfig {
    code: LdpcCode,
    final_code: Option<LdpcCode>,
    matcher: MatcherCode,
    blocks: usize,
    prior: Pmf,
}

impl BootstrapConfig {
    /// Chain of `blocks` rounds; the final round reuses `code` unless replaced.
    ///
    /// `prior` is the per-bit pmf the decoder assumes for matched bits.
    pub fn new(code: LdpcCode, matcher: MatcherCode, blocks: usize, prior: Pmf) -> Result<Self, BootstrapError> {
        let cfg = BootstrapConfig { code, final_code: None, matcher, blocks, prior };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_final_code(mut self, final_code: LdpcCode) -> Result<Self, BootstrapError> {
        self.final_code = Some(final_code);
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), BootstrapError> {
        let k = self.matcher.k();
        let fail = |msg: String| Err(BootstrapError::Config(msg));
        if self.blocks == 0 {
            return fail("at least one block is required".into());
        }
        for (name, code) in [("K", &self.code), ("K'", self.final_code())] {
            if code.k() % k != 0 {
                return fail(format!("{name} = {} is not a multiple of the matcher block length {k}", code.k()));
            }
        }
        let p = self.prior.probs();
        if p.len() != 2 || p[0] <= 0.0 || p[1] <= 0.0 {
            return fail(format!("prior {p:?} must be positive on both bits"));
        }
        // Each matched block reads at least the shortest source word, so a round
        // producing K/k blocks is guaranteed to swallow all pending check bits.
        let min_read = |code: &LdpcCode| (code.k() / k) * self.matcher.min_word_len() as usize;
        let m = self.code.m();
        if self.blocks >= 3 && m > min_read(&self.code) {
            return fail(format!("{m} check bits may not fit into one round reading at least {} bits", min_read(&self.code)));
        }
        if self.blocks >= 2 && m > min_read(self.final_code()) {
            return fail(format!("{m} check bits may not fit into the final round reading at least {} bits", min_read(self.final_code())));
        }
        Ok(())
    }

    pub fn code(&self) -> &LdpcCode {
        &self.code
    }

    pub fn final_code(&self) -> &LdpcCode {
        self.final_code.as_ref().unwrap_or(&self.code)
    }

    pub fn matcher(&self) -> &MatcherCode {
        &self.matcher
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn prior(&self) -> &Pmf {
        &self.prior
    }
}

/// Per-bit marginal of a block pmf, averaged over the `k` positions.
pub fn bit_marginal(d: &DyadicPmf, k: usize) -> Pmf {
    let ones: f64 = (0..d.len()).map(|b| d.prob(b) * (b as u32).count_ones() as f64).sum::<f64>() / k as f64;
    Pmf::new(vec![1.0 - ones, ones]).expect("marginal of a valid pmf")
}

fn block_cost(matcher: &MatcherCode, ch: &BinaryChannel) -> Result<f64, BootstrapError> {
    let d = matcher.block_pmf().to_pmf();
    Ok(block_weights(matcher.k(), ch.durations())?.average(&d)?)
}

/// Mutual information per unit cost of matched transmission.
pub fn i_bs(matcher: &MatcherCode, ch: &BinaryChannel) -> Result<f64, BootstrapError> {
    let d = matcher.block_pmf().to_pmf();
    Ok(ch.block_mutual_information(matcher.k(), &d)? / block_cost(matcher, ch)?)
}

/// Effective data rate per unit cost at code rate `c`. Negative when
/// recycling the check bits costs more than the matched bits carry.
pub fn r_bs(matcher: &MatcherCode, ch: &BinaryChannel, c: f64) -> Result<f64, BootstrapError> {
    let k = matcher.k() as f64;
    let h = entropy(&matcher.block_pmf().to_pmf());
    Ok((h / k + 1.0 - 1.0 / c) / (block_cost(matcher, ch)? / k))
}

pub fn coding_gain_bs(matcher: &MatcherCode, ch: &BinaryChannel, c: f64) -> Result<f64, BootstrapError> {
    let k = matcher.k() as f64;
    let d = matcher.block_pmf().to_pmf();
    let h = entropy(&d);
    let info = ch.block_mutual_information(matcher.k(), &d)?;
    Ok((h / k + 1.0 - 1.0 / c) / (info / k))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainAccounting {
    /// Unmatched input bits consumed per matched bit, inverted: `k / H(p)`.
    pub m: f64,
    /// Fresh data bits carried per block, `K/m − M`.
    pub info_bits: f64,
    pub effective_rate: f64,
    pub mi_rate: f64,
    pub shaping_gain: f64,
    pub coding_gain: f64,
}

pub fn accounting(cfg: &BootstrapConfig, ch: &BinaryChannel, capacity: f64) -> Result<ChainAccounting, BootstrapError> {
    let matcher = cfg.matcher();
    let code = cfg.code();
    let h = entropy(&matcher.block_pmf().to_pmf());
    let m = matcher.k() as f64 / h;
    let mi_rate = i_bs(matcher, ch)?;
    Ok(ChainAccounting {
        m,
        info_bits: code.k() as f64 / m - code.m() as f64,
        effective_rate: r_bs(matcher, ch, code.rate())?,
        mi_rate,
        shaping_gain: if capacity > 0.0 { mi_rate / capacity } else { 1.0 },
        coding_gain: coding_gain_bs(matcher, ch, code.rate())?,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainEncoding {
    /// Transmitted words, final block first.
    pub words: Vec<Vec<u8>>,
    /// Stream bits read by each round, in encoding order.
    pub consumed: Vec<usize>,
    /// The data bits carried by the chain, padding included.
    pub data: Vec<u8>,
}

impl ChainEncoding {
    pub fn transmitted_bits(&self) -> usize {
        self.words.iter().map(Vec::len).sum()
    }
}

fn match_bits(stream: &mut BitStream, matcher: &MatcherCode, n_bits: usize) -> Result<(Vec<u8>, usize), BootstrapError> {
    let out = match_stream(stream, matcher, n_bits / matcher.k())?;
    Ok((blocks_to_bits(&out.blocks, matcher.k()), out.consumed))
}

pub fn encode_chain(cfg: &BootstrapConfig, data: &mut BitStream) -> Result<ChainEncoding, BootstrapError> {
    let (code, matcher) = (cfg.code(), cfg.matcher());
    let mut words = Vec::with_capacity(cfg.blocks);
    let mut consumed = Vec::with_capacity(cfg.blocks);
    let mut carried = Vec::new();
    let mut pending = 0;
    for _ in 1..cfg.blocks {
        let start = data.position();
        let (bits, used) = match_bits(data, matcher, code.k())?;
        carried.extend_from_slice(&data.bits()[start + pending..start + used]);
        let checks = code.checks(&bits)?;
        data.prepend(&checks);
        pending = checks.len();
        words.push(bits);
        consumed.push(used);
    }
    let final_code = cfg.final_code();
    let start = data.position();
    let (bits, used) = match_bits(data, matcher, final_code.k())?;
    carried.extend_from_slice(&data.bits()[start + pending..start + used]);
    words.push(final_code.encode(&bits)?);
    consumed.push(used);
    words.reverse();
    Ok(ChainEncoding { words, consumed, data: carried })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainDecoding {
    /// Recovered data; empty unless every block converged.
    pub data: Vec<u8>,
    /// Convergence of block `i` (encoding order) at index `i − 1`.
    pub block_status: Vec<bool>,
    /// Decoded matched bits per block in encoding order; empty where decoding failed.
    pub matched_bits: Vec<Vec<u8>>,
}

impl ChainDecoding {
    pub fn all_converged(&self) -> bool {
        self.block_status.iter().all(|s| *s)
    }
}

/// Matched bits and dematched stream of one block, `None` on failure.
fn decode_block(
    decoder: &Decoder,
    matcher: &MatcherCode,
    llrs: LlrVector,
) -> Result<Option<(Vec<u8>, Vec<u8>)>, BootstrapError> {
    let mut res = decoder.decode(&llrs)?;
    if !res.converged {
        return Ok(None);
    }
    res.bits.truncate(decoder.code().k());
    let blocks = bits_to_blocks(&res.bits, matcher.k())?;
    Ok(dematch(&blocks, matcher).ok().map(|s| (res.bits, s.into_bits())))
}

pub fn decode_chain(cfg: &BootstrapConfig, received: &[Vec<u8>], epsilon: f64) -> Result<ChainDecoding, BootstrapError> {
    let b = cfg.blocks;
    if received.len() != b {
        return Err(BootstrapError::WordCount { expected: b, got: received.len() });
    }
    let (code, final_code, matcher) = (cfg.code(), cfg.final_code(), cfg.matcher());
    let expect_len = |got: usize, expected: usize| {
        if got == expected {
            Ok(())
        } else {
            Err(BootstrapError::Ldpc(LdpcError::Length { expected, got }))
        }
    };
    expect_len(received[0].len(), final_code.n())?;
    for w in &received[1..] {
        expect_len(w.len(), code.k())?;
    }

    let mut status = vec![false; b];
    let mut matched_bits = vec![Vec::new(); b];
    let mut pieces: Vec<Vec<u8>> = Vec::with_capacity(b);

    let first = &received[0];
    let kf = final_code.k();
    let llrs = bsc_llr_matched(&first[..kf], epsilon, &cfg.prior)?
        .concat(&bsc_llr_uniform(&first[kf..], epsilon)?);
    let final_decoder = Decoder::new(final_code, BpConfig::default());
    let Some((bits, mut stream)) = decode_block(&final_decoder, matcher, llrs)? else {
        return Ok(ChainDecoding { data: Vec::new(), block_status: status, matched_bits });
    };
    status[b - 1] = true;
    matched_bits[b - 1] = bits;

    let decoder = Decoder::new(code, BpConfig::default());
    let m = code.m();
    for i in (1..b).rev() {
        let checks = stream[..m].to_vec();
        pieces.push(stream.split_off(m));
        let word = &received[b - i];
        let llrs = bsc_llr_matched(word, epsilon, &cfg.prior)?.concat(&known_bit_llr(&checks));
        match decode_block(&decoder, matcher, llrs)? {
            Some((bits, s)) => {
                stream = s;
                status[i - 1] = true;
                matched_bits[i - 1] = bits;
            }
            None => return Ok(ChainDecoding { data: Vec::new(), block_status: status, matched_bits }),
        }
    }
    pieces.push(stream);
    pieces.reverse();
    Ok(ChainDecoding { data: pieces.concat(), block_status: status, matched_bits })
}

/// Paired Monte Carlo result for the building block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildingBlockReport {
    pub trials: u64,
    /// Errors when the decoder knows the `M` check bits.
    pub block_errors: u64,
    /// Errors on the same noise when the check bits also cross the channel.
    pub block_errors_channel_checks: u64,
    pub i_bs: f64,
    pub r_bs: f64,
    pub coding_gain: f64,
}

impl BuildingBlockReport {
    pub fn p_b(&self) -> f64 {
        self.block_errors as f64 / self.trials as f64
    }

    pub fn p_b_channel_checks(&self) -> f64 {
        self.block_errors_channel_checks as f64 / self.trials as f64
    }
}

/// One building-block trial. Returns whether the pinned decode failed and,
/// when `paired`, whether decoding received check bits on the same noise failed.
pub fn building_block_trial(
    decoder: &Decoder,
    matcher: &MatcherCode,
    epsilon: f64,
    prior: &Pmf,
    paired: bool,
    rng: &mut impl Rng,
) -> Result<(bool, Option<bool>), BootstrapError> {
    let code = decoder.code();
    let k = code.k();
    let mut stream = BitStream::with_padding(Vec::new(), Padding::Equiprobable(rng.random()));
    let (bits, _) = match_bits(&mut stream, matcher, k)?;
    let word = code.encode(&bits)?;
    let y = bsc_transmit(&word, epsilon, rng);
    let matched = bsc_llr_matched(&y[..k], epsilon, prior)?;
    let wrong = |llrs| -> Result<bool, BootstrapError> {
        let res = decoder.decode(&llrs)?;
        Ok(res.bits[..k] != word[..k])
    };
    let channel = if paired {
        Some(wrong(matched.clone().concat(&bsc_llr_uniform(&y[k..], epsilon)?))?)
    } else {
        None
    };
    Ok((wrong(matched.concat(&known_bit_llr(&word[k..])))?, channel))
}

/// `K` matched bits over the BSC, decoded with pinned check bits, next to
/// the same code decoding received check bits on identical noise.
pub fn simulate_building_block(
    code: &LdpcCode,
    matcher: &MatcherCode,
    ch: &BinaryChannel,
    prior: &Pmf,
    trials: u64,
    seed: u64,
) -> Result<BuildingBlockReport, BootstrapError> {
    if trials == 0 {
        return Err(BootstrapError::Config("at least one trial is required".into()));
    }
    if code.k() % matcher.k() != 0 {
        return Err(BootstrapError::Config(format!("K = {} is not a multiple of {}", code.k(), matcher.k())));
    }
    let epsilon = ch.transition(1, 0);
    let decoder = Decoder::new(code, BpConfig::default());
    let (pinned, channel) = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, 0, t);
            building_block_trial(&decoder, matcher, epsilon, prior, true, &mut rng)
                .map(|(a, b)| (a as u64, b.unwrap_or(false) as u64))
        })
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
    Ok(BuildingBlockReport {
        trials,
        block_errors: pinned,
        block_errors_channel_checks: channel,
        i_bs: i_bs(matcher, ch)?,
        r_bs: r_bs(matcher, ch, code.rate())?,
        coding_gain: coding_gain_bs(matcher, ch, code.rate())?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::capacity;
    use crate::ghc::matcher_for;
    use crate::ldpc::generate_code;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bsc15(eps: f64) -> BinaryChannel {
        BinaryChannel::bsc(eps, 1.0, 5.0).unwrap()
    }

    fn fig3_matcher() -> (MatcherCode, Pmf) {
        let cap = capacity(&bsc15(0.02)).unwrap();
        (matcher_for(&cap.p_star, 4).unwrap(), cap.p_star)
    }

    #[test]
    fn identity_matcher_rates() {
        let ch = bsc15(0.05);
        let id = MatcherCode::identity(1);
        let u = Pmf::uniform(2);
        let expected = ch.mutual_information(&u).unwrap() / ch.cost(&u).unwrap();
        assert!((i_bs(&id, &ch).unwrap() - expected).abs() < 1e-15);

        let flat = BinaryChannel::bsc(0.1, 1.0, 1.0).unwrap();
        for c in [0.5, 0.75, 0.9] {
            assert!((r_bs(&id, &flat, c).unwrap() - (2.0 - 1.0 / c)).abs() < 1e-15);
        }
    }

    #[test]
    fn full_rate_is_entropy_per_cost() {
        let ch = bsc15(0.02);
        let (mc, _) = fig3_matcher();
        let d = mc.block_pmf().to_pmf();
        let cost = block_weights(4, ch.durations()).unwrap().average(&d).unwrap();
        assert!((r_bs(&mc, &ch, 1.0).unwrap() - entropy(&d) / cost).abs() < 1e-14);
        let c = 0.75;
        let expected = (entropy(&d) / 4.0 + 1.0 - 4.0 / 3.0) / (cost / 4.0);
        assert!((r_bs(&mc, &ch, c).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn noiseless_dyadic_gain_is_one() {
        let ch = BinaryChannel::bsc(0.0, 1.0, 1.0).unwrap();
        let id = MatcherCode::identity(2);
        assert!((coding_gain_bs(&id, &ch, 1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gain_identity_and_unit_gain_point() {
        let ch = bsc15(0.03);
        let (mc, _) = fig3_matcher();
        for c in [0.6, 0.75, 0.8, 5.0 / 6.0, 8.0 / 9.0] {
            let lhs = coding_gain_bs(&mc, &ch, c).unwrap() * i_bs(&mc, &ch).unwrap();
            assert!((lhs - r_bs(&mc, &ch, c).unwrap()).abs() < 1e-12);
        }
        // Numerator equal to I/k: H/k + 1 − 1/c = I/k.
        let d = mc.block_pmf().to_pmf();
        let info = ch.block_mutual_information(4, &d).unwrap();
        let c = 1.0 / (entropy(&d) / 4.0 + 1.0 - info / 4.0);
        assert!((coding_gain_bs(&mc, &ch, c).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn accounting_matches_definitions() {
        let code = generate_code(1024, 0.75, 3).unwrap();
        let (mc, p) = fig3_matcher();
        let ch = bsc15(0.02);
        let cfg = BootstrapConfig::new(code, mc.clone(), 5, p).unwrap();
        let acc = accounting(&cfg, &ch, 1.0).unwrap();
        let h = entropy(&mc.block_pmf().to_pmf());
        assert!((acc.m - 4.0 / h).abs() < 1e-15);
        assert!((acc.info_bits - (768.0 / acc.m - 256.0)).abs() < 1e-9);
    }

    #[test]
    fn config_validation() {
        let (mc, p) = fig3_matcher();
        let half = generate_code(1024, 0.5, 3).unwrap();
        assert!(BootstrapConfig::new(half.clone(), mc.clone(), 1, p.clone()).is_ok());
        assert!(BootstrapConfig::new(half.clone(), mc.clone(), 2, p.clone()).is_err());
        assert!(BootstrapConfig::new(half, mc.clone(), 0, p.clone()).is_err());
        let bad_prior = Pmf::new(vec![1.0, 0.0]).unwrap();
        let code = generate_code(1024, 0.75, 3).unwrap();
        assert!(BootstrapConfig::new(code, mc, 2, bad_prior).is_err());
    }

    fn chain_round_trip(k: usize, blocks: usize, seed: u64) {
        let code = generate_code(1024, 0.75, 3).unwrap();
        let cap = capacity(&bsc15(0.02)).unwrap();
        let mc = matcher_for(&cap.p_star, k).unwrap();
        let cfg = BootstrapConfig::new(code, mc, blocks, cap.p_star.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut stream = BitStream::with_padding(Vec::new(), Padding::Equiprobable(rng.random()));
        let enc = encode_chain(&cfg, &mut stream).unwrap();
        assert_eq!(enc.words.len(), blocks);
        assert_eq!(enc.words[0].len(), 1024);
        assert!(enc.words[1..].iter().all(|w| w.len() == 768));
        let dec = decode_chain(&cfg, &enc.words, 0.0).unwrap();
        assert!(dec.all_converged());
        assert_eq!(dec.data, enc.data);
    }

    #[test]
    fn noiseless_chain_round_trip() {
        for k in [1, 2, 4] {
            for b in [1, 2, 5] {
                chain_round_trip(k, b, (k * 10 + b) as u64);
            }
        }
    }

    #[test]
    fn carried_data_is_the_stream_minus_checks() {
        let code = generate_code(1024, 0.75, 3).unwrap();
        let (mc, p) = fig3_matcher();
        let cfg = BootstrapConfig::new(code, mc, 3, p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let input: Vec<u8> = (0..20_000).map(|_| rng.random::<bool>() as u8).collect();
        let mut stream = BitStream::new(input.clone());
        let enc = encode_chain(&cfg, &mut stream).unwrap();
        assert_eq!(enc.data, input[..enc.data.len()]);
        let total: usize = enc.consumed.iter().sum();
        assert_eq!(total, enc.data.len() + 2 * 256);
    }

    #[test]
    fn first_block_failure_fails_everything() {
        let code = generate_code(1024, 0.75, 3).unwrap();
        let (mc, p) = fig3_matcher();
        let cfg = BootstrapConfig::new(code, mc, 3, p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut stream = BitStream::with_padding(Vec::new(), Padding::Equiprobable(1));
        let mut enc = encode_chain(&cfg, &mut stream).unwrap();
        enc.words[0] = bsc_transmit(&enc.words[0], 0.3, &mut rng);
        let dec = decode_chain(&cfg, &enc.words, 0.3).unwrap();
        assert_eq!(dec.block_status, vec![false; 3]);
        assert!(dec.data.is_empty());
    }

    #[test]
    fn wrong_word_count_rejected() {
        let code = generate_code(1024, 0.75, 3).unwrap();
        let (mc, p) = fig3_matcher();
        let cfg = BootstrapConfig::new(code, mc, 2, p).unwrap();
        assert!(matches!(decode_chain(&cfg, &[vec![0; 1024]], 0.01), Err(BootstrapError::WordCount { .. })));
    }

    #[test]
    fn noiseless_building_block_has_no_errors() {
        let code = generate_code(1024, 0.5, 1).unwrap();
        let (mc, p) = fig3_matcher();
        let rep = simulate_building_block(&code, &mc, &bsc15(0.0), &p, 50, 1).unwrap();
        assert_eq!(rep.block_errors, 0);
        assert_eq!(rep.block_errors_channel_checks, 0);
        assert_eq!(rep.i_bs, i_bs(&mc, &bsc15(0.0)).unwrap());
        assert_eq!(rep.r_bs, r_bs(&mc, &bsc15(0.0), 0.5).unwrap());
    }

    #[test]
    fn building_block_is_seed_deterministic() {
        let code = generate_code(1024, 0.5, 1).unwrap();
        let (mc, p) = fig3_matcher();
        let ch = bsc15(0.08);
        let a = simulate_building_block(&code, &mc, &ch, &p, 40, 7).unwrap();
        let b = simulate_building_block(&code, &mc, &ch, &p, 40, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn block_marginal_of_identity_is_uniform() {
        let m = bit_marginal(&DyadicPmf::uniform(3), 3);
        assert!((m.get(0) - 0.5).abs() < 1e-15);
    }
}
