//! Monte Carlo sweeps over the crossover probability and their CSV output.

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::bootstrap::{
    bit_marginal, building_block_trial, coding_gain_bs, decode_chain, encode_chain, i_bs, r_bs, BootstrapConfig,
    BootstrapError,
};
use crate::capacity::{capacity, uniform_shaping_gain, CapacityError, CapacityResult};
use crate::channel::{bsc_transmit, BinaryChannel, ChannelError, Pmf};
use crate::ghc::{matcher_for, GhcError, MatcherCode};
use crate::ldpc::{
    bsc_llr_matched, bsc_llr_uniform, generate_code, make_systematic, parse_alist, BpConfig, Decoder, LdpcCode,
    LdpcError,
};
use crate::matcher::{blocks_to_bits, match_stream, random_bits, BitStream, Padding};
use crate::sparse_dense::{sd_gaps, SparseDenseError};

/// Crossover probabilities 0.005, 0.010, …, 0.055 and 0.057.
pub const DEFAULT_EPSILONS: [f64; 12] =
    [0.005, 0.010, 0.015, 0.020, 0.025, 0.030, 0.035, 0.040, 0.045, 0.050, 0.055, 0.057];

pub const CSV_HEADER: [&str; 11] = [
    "epsilon",
    "code_rate",
    "mode",
    "trials",
    "block_errors",
    "p_b",
    "capacity",
    "shaping_gain",
    "coding_gain",
    "effective_rate",
    "mi_rate",
];

/// Random source for one trial: the master seed keys ChaCha8 and
/// `(point << 32) | trial` selects the stream, so trials are independent of
/// execution order.
pub fn trial_rng(master: u64, point: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream((point << 32) | (trial & 0xFFFF_FFFF));
    rng
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("loading code from {path}: {source}")]
    CodeFile { path: PathBuf, source: LdpcError },
    #[error("reading {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("CSV: {0}")]
    Csv(String),
    #[error("at epsilon {epsilon}: {message}")]
    Point { epsilon: f64, message: String },
    #[error(transparent)]
    Capacity(#[from] CapacityError),
    #[error(transparent)]
    Bootstrap(#[from] BootstrapError),
    #[error(transparent)]
    Ghc(#[from] GhcError),
    #[error(transparent)]
    Ldpc(#[from] LdpcError),
    #[error(transparent)]
    SparseDense(#[from] SparseDenseError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

impl SimError {
    /// Whether the error stems from the configuration rather than from running it.
    pub fn is_usage(&self) -> bool {
        matches!(self, SimError::Config(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    Uniform,
    SparseDense,
    Bootstrap,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Uniform => "uniform",
            Mode::SparseDense => "sparse_dense",
            Mode::Bootstrap => "bootstrap",
        })
    }
}

impl FromStr for Mode {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(Mode::Uniform),
            "sparse_dense" | "sparse-dense" => Ok(Mode::SparseDense),
            "bootstrap" => Ok(Mode::Bootstrap),
            _ => Err(SimError::Config(format!("unknown mode {s:?} (uniform, sparse_dense, bootstrap)"))),
        }
    }
}

/// Prior on matched bits given to the decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Prior {
    /// Marginal of the capacity-achieving pmf.
    #[default]
    PStar,
    /// Exact per-bit marginal of the dyadic block pmf.
    BlockMarginal,
}

impl fmt::Display for Prior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Prior::PStar => "p-star",
            Prior::BlockMarginal => "block-marginal",
        })
    }
}

impl FromStr for Prior {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('_', "-").as_str() {
            "p-star" => Ok(Prior::PStar),
            "block-marginal" => Ok(Prior::BlockMarginal),
            _ => Err(SimError::Config(format!("unknown prior {s:?} (p-star, block-marginal)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CodeSource {
    /// PEG code of length `n`, seeded with the sweep seed.
    Generated { n: usize, rate: f64 },
    Alist(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub w0: f64,
    pub w1: f64,
    pub epsilons: Vec<f64>,
    pub k: usize,
    pub code: CodeSource,
    pub mode: Mode,
    pub trials: u64,
    /// Chain length in bootstrap mode; 1 simulates the building block alone.
    pub blocks: usize,
    pub prior: Prior,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            w0: 1.0,
            w1: 5.0,
            epsilons: DEFAULT_EPSILONS.to_vec(),
            k: 4,
            code: CodeSource::Generated { n: 1024, rate: 0.75 },
            mode: Mode::Bootstrap,
            trials: 1000,
            blocks: 1,
            prior: Prior::PStar,
            seed: 1,
            out: None,
        }
    }
}

/// Keys understood in config files and their flag equivalents.
pub const SETTING_KEYS: [&str; 14] = [
    "w0",
    "w1",
    "epsilon",
    "epsilon-list",
    "k",
    "mode",
    "rate",
    "code-n",
    "code-file",
    "blocks",
    "prior",
    "trials",
    "seed",
    "out",
];

fn normalize_key(key: &str) -> String {
    key.trim().trim_start_matches("--").replace('_', "-").to_ascii_lowercase()
}

/// Flat `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, SimError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| SimError::Config(format!("line {}: expected `key = value`", i + 1)))?;
        let key = normalize_key(key);
        if !SETTING_KEYS.contains(&key.as_str()) {
            return Err(SimError::Config(format!("line {}: unknown key {key:?}", i + 1)));
        }
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(SimError::Config(format!("line {}: duplicate key {key:?}", i + 1)));
        }
    }
    Ok(map)
}

/// Overlays `flags` on `file`. A flag also clears the file's alternative
/// spelling of the same setting (`epsilon` versus `epsilon-list`, generated
/// code versus `code-file`).
pub fn merge_settings(mut file: BTreeMap<String, String>, flags: BTreeMap<String, String>) -> BTreeMap<String, String> {
    for (key, value) in flags {
        let key = normalize_key(&key);
        let shadowed: &[&str] = match key.as_str() {
            "epsilon" => &["epsilon-list"],
            "epsilon-list" => &["epsilon"],
            "code-n" | "rate" => &["code-file"],
            "code-file" => &["code-n", "rate"],
            _ => &[],
        };
        for s in shadowed {
            file.remove(*s);
        }
        file.insert(key, value);
    }
    file
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, SimError> {
    value.trim().parse().map_err(|_| SimError::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, SimError> {
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| parse_value(key, t))
        .collect()
}

impl SweepConfig {
    /// Defaults overridden by the given settings; validated.
    pub fn from_settings(settings: &BTreeMap<String, String>) -> Result<Self, SimError> {
        let mut cfg = SweepConfig::default();
        let (mut n, mut rate) = (1024usize, 0.75f64);
        for (key, value) in settings {
            match key.as_str() {
                "w0" => cfg.w0 = parse_value(key, value)?,
                "w1" => cfg.w1 = parse_value(key, value)?,
                "epsilon" => cfg.epsilons = vec![parse_value(key, value)?],
                "epsilon-list" => cfg.epsilons = parse_list(key, value)?,
                "k" => cfg.k = parse_value(key, value)?,
                "mode" => cfg.mode = value.parse()?,
                "rate" => rate = parse_value(key, value)?,
                "code-n" => n = parse_value(key, value)?,
                "code-file" => {}
                "blocks" => cfg.blocks = parse_value(key, value)?,
                "prior" => cfg.prior = value.parse()?,
                "trials" => cfg.trials = parse_value(key, value)?,
                "seed" => cfg.seed = parse_value(key, value)?,
                "out" => cfg.out = Some(PathBuf::from(value)),
                other => return Err(SimError::Config(format!("unknown setting {other:?}"))),
            }
        }
        cfg.code = match settings.get("code-file") {
            Some(path) => CodeSource::Alist(PathBuf::from(path)),
            None => CodeSource::Generated { n, rate },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |msg: String| Err(SimError::Config(msg));
        if !(self.w0 > 0.0 && self.w1 > 0.0 && self.w0.is_finite() && self.w1.is_finite()) {
            return fail(format!("durations ({}, {}) must be positive", self.w0, self.w1));
        }
        if self.epsilons.is_empty() {
            return fail("no epsilon values".into());
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && **e < 0.5)) {
            return fail(format!("epsilon {e} outside (0, 0.5)"));
        }
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        if self.blocks == 0 {
            return fail("blocks must be at least 1".into());
        }
        if self.k == 0 || self.k > crate::ghc::MAX_JOINT_BITS {
            return fail(format!("k = {} outside 1..={}", self.k, crate::ghc::MAX_JOINT_BITS));
        }
        if let CodeSource::Generated { n, rate } = self.code {
            if n < 8 || !(rate > 0.0 && rate < 1.0) {
                return fail(format!("cannot generate a code with n = {n}, rate = {rate}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionReport {
    pub epsilon: f64,
    pub code_rate: f64,
    pub mode: Mode,
    pub trials: u64,
    pub block_errors: u64,
    pub p_b: f64,
    pub capacity: f64,
    pub shaping_gain: f64,
    pub coding_gain: f64,
    pub effective_rate: f64,
    pub mi_rate: f64,
}

/// Generated or loaded code in systematic form. Redundant rows of a loaded
/// matrix are dropped.
pub fn load_code(source: &CodeSource, seed: u64) -> Result<LdpcCode, SimError> {
    match source {
        CodeSource::Generated { n, rate } => Ok(generate_code(*n, *rate, seed)?),
        CodeSource::Alist(path) => {
            let bytes = std::fs::read(path).map_err(|e| SimError::Io { path: path.clone(), message: e.to_string() })?;
            let with_path = |source: LdpcError| SimError::CodeFile { path: path.clone(), source };
            let h = parse_alist(&bytes).map_err(|e| with_path(e.into()))?;
            make_systematic(&h.drop_redundant_rows()).map_err(with_path)
        }
    }
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<TransmissionReport>, SimError> {
    cfg.validate()?;
    let code = load_code(&cfg.code, cfg.seed)?;
    let mut reports = Vec::with_capacity(cfg.epsilons.len());
    for (i, &eps) in cfg.epsilons.iter().enumerate() {
        reports.push(run_point(cfg, &code, i as u64, eps)?);
    }
    sort_reports(&mut reports);
    Ok(reports)
}

fn count_errors<F>(trials: u64, seed: u64, point: u64, trial: F) -> Result<u64, SimError>
where
    F: Fn(&mut ChaCha8Rng) -> Result<u64, SimError> + Sync,
{
    (0..trials).into_par_iter().map(|t| trial(&mut trial_rng(seed, point, t))).try_reduce(|| 0, |a, b| Ok(a + b))
}

struct Gains {
    shaping: f64,
    coding: f64,
    effective_rate: f64,
    mi_rate: f64,
}

/// Simulates one crossover probability with the configured mode.
pub fn run_point(cfg: &SweepConfig, code: &LdpcCode, point: u64, epsilon: f64) -> Result<TransmissionReport, SimError> {
    let ch = BinaryChannel::bsc(epsilon, cfg.w0, cfg.w1)?;
    let cap = capacity(&ch)?;
    let c = code.rate();
    let decoder = Decoder::new(code, BpConfig::default());
    let (gains, trials, errors) = match cfg.mode {
        Mode::Uniform => {
            let u = Pmf::uniform(2);
            let (iu, cost) = (ch.mutual_information(&u)?, ch.cost(&u)?);
            let gains = Gains {
                shaping: uniform_shaping_gain(&ch, &cap),
                coding: c / iu,
                effective_rate: c / cost,
                mi_rate: iu / cost,
            };
            let errors = count_errors(cfg.trials, cfg.seed, point, |rng| {
                Ok(uniform_trial(&decoder, epsilon, rng)? as u64)
            })?;
            (gains, cfg.trials, errors)
        }
        Mode::SparseDense => {
            let matcher = shaped_matcher(cfg, code, &cap, epsilon)?;
            let marginal = bit_marginal(matcher.block_pmf(), matcher.k());
            let prior = decoder_prior(cfg, &matcher, &cap);
            let rep = sd_gaps(&ch, &marginal, c, &cap)?;
            let gains = Gains {
                shaping: rep.shaping_gap,
                coding: rep.coding_gap,
                effective_rate: rep.rate,
                mi_rate: rep.mi_per_weight,
            };
            let errors = count_errors(cfg.trials, cfg.seed, point, |rng| {
                Ok(sparse_dense_trial(&decoder, &matcher, epsilon, &prior, rng)? as u64)
            })?;
            (gains, cfg.trials, errors)
        }
        Mode::Bootstrap => {
            let matcher = shaped_matcher(cfg, code, &cap, epsilon)?;
            let prior = decoder_prior(cfg, &matcher, &cap);
            let rate = r_bs(&matcher, &ch, c)?;
            if rate < 0.0 {
                return Err(BootstrapError::NegativeRate(rate).into());
            }
            let mi = i_bs(&matcher, &ch)?;
            let gains = Gains {
                shaping: mi / cap.capacity,
                coding: coding_gain_bs(&matcher, &ch, c)?,
                effective_rate: rate,
                mi_rate: mi,
            };
            if cfg.blocks == 1 {
                let errors = count_errors(cfg.trials, cfg.seed, point, |rng| {
                    let (pinned, _) = building_block_trial(&decoder, &matcher, epsilon, &prior, false, rng)?;
                    Ok(pinned as u64)
                })?;
                (gains, cfg.trials, errors)
            } else {
                let chain = BootstrapConfig::new(code.clone(), matcher, cfg.blocks, prior)?;
                let errors =
                    count_errors(cfg.trials, cfg.seed, point, |rng| chain_trial(&chain, epsilon, rng))?;
                (gains, cfg.trials * cfg.blocks as u64, errors)
            }
        }
    };
    Ok(TransmissionReport {
        epsilon,
        code_rate: c,
        mode: cfg.mode,
        trials,
        block_errors: errors,
        p_b: errors as f64 / trials as f64,
        capacity: cap.capacity,
        shaping_gain: gains.shaping,
        coding_gain: gains.coding,
        effective_rate: gains.effective_rate,
        mi_rate: gains.mi_rate,
    })
}

fn decoder_prior(cfg: &SweepConfig, matcher: &MatcherCode, cap: &CapacityResult) -> Pmf {
    match cfg.prior {
        Prior::PStar => cap.p_star.clone(),
        Prior::BlockMarginal => bit_marginal(matcher.block_pmf(), matcher.k()),
    }
}

fn shaped_matcher(cfg: &SweepConfig, code: &LdpcCode, cap: &CapacityResult, epsilon: f64) -> Result<MatcherCode, SimError> {
    if code.k() % cfg.k != 0 {
        return Err(SimError::Point {
            epsilon,
            message: format!("K = {} is not a multiple of the matcher block length {}", code.k(), cfg.k),
        });
    }
    Ok(matcher_for(&cap.p_star, cfg.k)?)
}

/// Uniform data, all `N` bits over the channel. Returns whether the data bits were lost.
pub fn uniform_trial(decoder: &Decoder, epsilon: f64, rng: &mut impl Rng) -> Result<bool, SimError> {
    let code = decoder.code();
    let data = random_bits(code.k(), rng);
    let word = code.encode(&data)?;
    let y = bsc_transmit(&word, epsilon, rng);
    let res = decoder.decode(&bsc_llr_uniform(&y, epsilon)?)?;
    Ok(res.bits[..code.k()] != data[..])
}

/// Matched data bits and uniform check bits, all over the channel.
pub fn sparse_dense_trial(
    decoder: &Decoder,
    matcher: &MatcherCode,
    epsilon: f64,
    prior: &Pmf,
    rng: &mut impl Rng,
) -> Result<bool, SimError> {
    let code = decoder.code();
    let k = code.k();
    let mut stream = BitStream::with_padding(Vec::new(), Padding::Equiprobable(rng.random()));
    let out = match_stream(&mut stream, matcher, k / matcher.k()).map_err(BootstrapError::from)?;
    let word = code.encode(&blocks_to_bits(&out.blocks, matcher.k()))?;
    let y = bsc_transmit(&word, epsilon, rng);
    let llrs = bsc_llr_matched(&y[..k], epsilon, prior)?.concat(&bsc_llr_uniform(&y[k..], epsilon)?);
    let res = decoder.decode(&llrs)?;
    Ok(res.bits[..k] != word[..k])
}

/// One full chain; returns the number of blocks lost.
pub fn chain_trial(cfg: &BootstrapConfig, epsilon: f64, rng: &mut impl Rng) -> Result<u64, SimError> {
    let mut stream = BitStream::with_padding(Vec::new(), Padding::Equiprobable(rng.random()));
    let enc = encode_chain(cfg, &mut stream)?;
    let received: Vec<Vec<u8>> = enc.words.iter().map(|w| bsc_transmit(w, epsilon, rng)).collect();
    let dec = decode_chain(cfg, &received, epsilon)?;
    let b = cfg.blocks();
    let lost = (1..=b)
        .filter(|&i| {
            let word = &enc.words[b - i];
            let k = if i == b { cfg.final_code().k() } else { cfg.code().k() };
            !dec.block_status[i - 1] || dec.matched_bits[i - 1] != word[..k]
        })
        .count();
    Ok(lost as u64)
}

fn sort_reports(reports: &mut [TransmissionReport]) {
    reports.sort_by(|a, b| {
        a.mode.cmp(&b.mode).then(a.epsilon.total_cmp(&b.epsilon)).then(a.code_rate.total_cmp(&b.code_rate))
    });
}

/// Decimal rendering with six significant digits.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".to_string() } else { x.to_string() };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // Rounding can carry into a new digit (9.999996 → 10.00000).
    let rounded: f64 = s.parse().expect("formatted float");
    if decimals > 0 && rounded.abs() >= 10f64.powi(magnitude + 1) {
        format!("{x:.*}", decimals - 1)
    } else {
        s
    }
}

pub fn write_csv<W: io::Write>(reports: &[TransmissionReport], out: W) -> Result<(), SimError> {
    let mut sorted = reports.to_vec();
    sort_reports(&mut sorted);
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| SimError::Csv(e.to_string());
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in &sorted {
        w.write_record([
            format_sig6(r.epsilon),
            format_sig6(r.code_rate),
            r.mode.to_string(),
            r.trials.to_string(),
            r.block_errors.to_string(),
            format_sig6(r.p_b),
            format_sig6(r.capacity),
            format_sig6(r.shaping_gain),
            format_sig6(r.coding_gain),
            format_sig6(r.effective_rate),
            format_sig6(r.mi_rate),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| SimError::Csv(e.to_string()))
}

pub fn emit_csv(reports: &[TransmissionReport], out: &Path) -> Result<(), SimError> {
    let file = std::fs::File::create(out).map_err(|e| SimError::Io { path: out.to_path_buf(), message: e.to_string() })?;
    write_csv(reports, io::BufWriter::new(file))
}

pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<TransmissionReport>, SimError> {
    let mut r = csv::Reader::from_reader(input);
    let csv_err = |e: csv::Error| SimError::Csv(e.to_string());
    let header = r.headers().map_err(csv_err)?;
    if header.iter().ne(CSV_HEADER) {
        return Err(SimError::Csv(format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let field = |i: usize| rec.get(i).ok_or_else(|| SimError::Csv(format!("missing column {}", CSV_HEADER[i])));
        let num = |i: usize| -> Result<f64, SimError> {
            let v = field(i)?;
            v.parse().map_err(|_| SimError::Csv(format!("{}: {v:?}", CSV_HEADER[i])))
        };
        let int = |i: usize| -> Result<u64, SimError> {
            let v = field(i)?;
            v.parse().map_err(|_| SimError::Csv(format!("{}: {v:?}", CSV_HEADER[i])))
        };
        out.push(TransmissionReport {
            epsilon: num(0)?,
            code_rate: num(1)?,
            mode: field(2)?.parse()?,
            trials: int(3)?,
            block_errors: int(4)?,
            p_b: num(5)?,
            capacity: num(6)?,
            shaping_gain: num(7)?,
            coding_gain: num(8)?,
            effective_rate: num(9)?,
            mi_rate: num(10)?,
        });
    }
    Ok(out)
}

/// Fixed-width summary table, one line per report.
pub fn summary_table(reports: &[TransmissionReport]) -> String {
    let mut s = format!(
        "{:<13} {:>8} {:>7} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
        "mode", "epsilon", "rate", "p_b", "C", "shaping", "coding", "rate/T"
    );
    for r in reports {
        s.push_str(&format!(
            "{:<13} {:>8} {:>7} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
            r.mode.to_string(),
            format_sig6(r.epsilon),
            format!("{:.4}", r.code_rate),
            format!("{:.3e}", r.p_b),
            format!("{:.6}", r.capacity),
            format!("{:.6}", r.shaping_gain),
            format!("{:.6}", r.coding_gain),
            format!("{:.6}", r.effective_rate),
        ));
    }
    s
}
