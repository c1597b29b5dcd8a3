use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use shapegap::capacity::capacity;
use shapegap::channel::{kl_divergence, BinaryChannel};
use shapegap::ghc::{joint_pmf, matcher_for};
use shapegap::sim::{emit_csv, merge_settings, parse_config_text, run_sweep, summary_table, SimError, SweepConfig};

#[derive(Parser)]
#[command(name = "shapegap", version, about = "Shaping gaps on binary channels with unequal symbol durations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Capacity per unit cost of a BSC with symbol durations w0, w1.
    Capacity(ChannelFlags),
    /// Matcher code for k channel uses at the capacity-achieving pmf.
    Ghc(GhcFlags),
    /// Monte Carlo sweep over epsilon, written as CSV.
    Simulate(SimulateFlags),
}

#[derive(Args)]
struct ChannelFlags {
    #[arg(long)]
    w0: Option<f64>,
    #[arg(long)]
    w1: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Flat `key = value` file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct GhcFlags {
    #[command(flatten)]
    channel: ChannelFlags,
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args)]
struct SimulateFlags {
    #[command(flatten)]
    channel: ChannelFlags,
    #[arg(long)]
    k: Option<usize>,
    /// Comma-separated crossover probabilities.
    #[arg(long)]
    epsilon_list: Option<String>,
    /// uniform, sparse_dense or bootstrap.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    code_n: Option<usize>,
    /// Parity-check matrix in alist format instead of a generated code.
    #[arg(long)]
    code_file: Option<PathBuf>,
    #[arg(long)]
    blocks: Option<usize>,
    /// Decoder prior on matched bits: p-star or block-marginal.
    #[arg(long)]
    prior: Option<String>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        if e.is_usage() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn push<T: ToString>(map: &mut BTreeMap<String, String>, key: &str, value: &Option<T>) {
    if let Some(v) = value {
        map.insert(key.to_string(), v.to_string());
    }
}

fn settings(channel: &ChannelFlags, extra: BTreeMap<String, String>) -> Result<BTreeMap<String, String>, Failure> {
    let file = match &channel.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Runtime(format!("reading {}: {e}", path.display())))?;
            parse_config_text(&text)?
        }
        None => BTreeMap::new(),
    };
    let mut flags = extra;
    push(&mut flags, "w0", &channel.w0);
    push(&mut flags, "w1", &channel.w1);
    push(&mut flags, "epsilon", &channel.epsilon);
    Ok(merge_settings(file, flags))
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn number<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str, default: Option<T>) -> Result<T, Failure> {
    match map.get(key) {
        Some(v) => v.trim().parse().map_err(|_| Failure::Usage(format!("{key}: cannot parse {v:?}"))),
        None => default.ok_or_else(|| Failure::Usage(format!("missing --{key}"))),
    }
}

fn channel_from(map: &BTreeMap<String, String>) -> Result<BinaryChannel, Failure> {
    let w0 = number(map, "w0", Some(1.0))?;
    let w1 = number(map, "w1", Some(5.0))?;
    let eps = number(map, "epsilon", None)?;
    BinaryChannel::bsc(eps, w0, w1).map_err(|e| Failure::Usage(e.to_string()))
}

fn cmd_capacity(flags: &ChannelFlags) -> Result<(), Failure> {
    let ch = channel_from(&settings(flags, BTreeMap::new())?)?;
    let cap = capacity(&ch).map_err(|e| Failure::Runtime(e.to_string()))?;
    emit(&format!(
        "p_star = {:.12} {:.12}\ncapacity = {:.12}\nkkt_residual = {:.3e}\n",
        cap.p_star.get(0),
        cap.p_star.get(1),
        cap.capacity,
        cap.kkt_residual
    ));
    Ok(())
}

fn cmd_ghc(flags: &GhcFlags) -> Result<(), Failure> {
    let mut extra = BTreeMap::new();
    push(&mut extra, "k", &flags.k);
    let map = settings(&flags.channel, extra)?;
    let ch = channel_from(&map)?;
    let k: usize = number(&map, "k", Some(4))?;
    let cap = capacity(&ch).map_err(|e| Failure::Runtime(e.to_string()))?;
    let code = matcher_for(&cap.p_star, k).map_err(|e| Failure::Usage(e.to_string()))?;
    let target = joint_pmf(&cap.p_star, k).map_err(|e| Failure::Usage(e.to_string()))?;
    let divergence = kl_divergence(&code.block_pmf().to_pmf(), &target);
    emit(&format!("{}# divergence = {divergence:.12}\n", code.table()));
    Ok(())
}

fn cmd_simulate(flags: &SimulateFlags) -> Result<(), Failure> {
    let mut extra = BTreeMap::new();
    push(&mut extra, "k", &flags.k);
    push(&mut extra, "epsilon-list", &flags.epsilon_list);
    push(&mut extra, "mode", &flags.mode);
    push(&mut extra, "rate", &flags.rate);
    push(&mut extra, "code-n", &flags.code_n);
    push(&mut extra, "code-file", &flags.code_file.as_ref().map(|p| p.display()));
    push(&mut extra, "blocks", &flags.blocks);
    push(&mut extra, "prior", &flags.prior);
    push(&mut extra, "trials", &flags.trials);
    push(&mut extra, "seed", &flags.seed);
    push(&mut extra, "out", &flags.out.as_ref().map(|p| p.display()));
    let cfg = SweepConfig::from_settings(&settings(&flags.channel, extra)?)?;
    let out = cfg.out.clone().ok_or_else(|| Failure::Usage("missing --out".into()))?;
    let reports = run_sweep(&cfg)?;
    emit_csv(&reports, &out)?;
    emit(&summary_table(&reports));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Capacity(f) => cmd_capacity(f),
        Command::Ghc(f) => cmd_ghc(f),
        Command::Simulate(f) => cmd_simulate(f),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run with --help for usage");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
