//! `advstream` experiment runner.

use std::path::PathBuf;
use std::process::ExitCode;

use advstream::samplers::SamplerKind;
use advstream::stream::Query;
use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

mod commands;
mod config;
mod output;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("{0}")]
    Run(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Run(_) => 1,
            CliError::Invariant(_) => 2,
        }
    }
}

macro_rules! run_error_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Run(e.to_string())
            }
        }
    )*};
}

run_error_from!(
    advstream::adversary::GameError,
    advstream::learnability::LearnError,
    advstream::robustify::RobustError,
    advstream::samplers::SamplerError,
    advstream::sketches::SketchError,
    advstream::stream::StreamError,
    std::io::Error,
    serde_json::Error
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Jsonl,
}

/// Seeded experiments on adversarially robust streaming and sampling.
///
/// Every flag can also come from `--config FILE` (`key = value` lines,
/// optional `[subcommand]` sections); flags on the command line win.
#[derive(Debug, Parser)]
#[command(name = "advstream", version)]
pub struct Cli {
    /// Master seed; trial i uses a seed mixed from (seed, i).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 1)]
    pub trials: u64,
    /// Per-trial records go here.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Record format; defaults to the `--out` extension, else JSONL.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads for independent trials (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Static AMS or KMV estimates on random or file streams.
    Sketch(SketchArgs),
    /// Sketch switching: run or exhaustively check a robustified estimator.
    Robustify(RobustifyArgs),
    /// Flip number of the true query sequence against its bound.
    Flips(FlipsArgs),
    /// Oblivious samplers and their epsilon-approximation error.
    Sample(SampleArgs),
    /// Adaptive interval attack on a Bernoulli sampler.
    AttackInterval(AttackIntervalArgs),
    /// Row-space learning attack on a GapNorm linear sketch.
    AttackGapnorm(AttackGapnormArgs),
    /// Hash-learning attack on KMV, alone and behind sketch switching.
    AttackKmv(AttackKmvArgs),
    /// VC and Littlestone dimension of a set system.
    Dims(DimsArgs),
    /// The online discrepancy game and sequential Rademacher estimate.
    Disc(DiscArgs),
    /// Replay a recorded transcript against a defender.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SketchKind {
    Ams,
    Kmv,
}

#[derive(Debug, Args)]
pub struct SketchArgs {
    #[arg(long, value_enum, default_value = "ams")]
    pub kind: SketchKind,
    #[arg(long, default_value_t = 0.2)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// KMV capacity.
    #[arg(long, default_value_t = 1024)]
    pub k: usize,
    /// Random stream length.
    #[arg(long, default_value_t = 10_000)]
    pub length: usize,
    #[arg(long, default_value_t = 1000)]
    pub universe: u64,
    /// Stream file (`index delta` per line) used by every trial.
    #[arg(long)]
    pub stream: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CopyKind {
    Oracle,
    Ams,
    Kmv,
}

#[derive(Debug, Args)]
pub struct RobustifyArgs {
    #[arg(long, default_value = "f0")]
    pub query: Query,
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 1000)]
    pub universe: u64,
    #[arg(long, default_value_t = 10_000)]
    pub length: u64,
    #[arg(long, value_enum, default_value = "kmv")]
    pub copies: CopyKind,
    /// KMV copy capacity.
    #[arg(long, default_value_t = 1024)]
    pub k: usize,
    /// AMS copy accuracy (default eps/2).
    #[arg(long)]
    pub copy_eps: Option<f64>,
    /// Reuse copies cyclically instead of stopping at the last one.
    #[arg(long)]
    pub cyclic: bool,
    /// Number of copies, replacing the flip-number rule.
    #[arg(long)]
    pub lambda: Option<usize>,
    #[arg(long)]
    pub stream: Option<PathBuf>,
    /// Per-round report of trial 0.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Check every insertion stream up to `--length` over `--universe` with
    /// oracle copies.
    #[arg(long)]
    pub exhaustive: bool,
}

#[derive(Debug, Args)]
pub struct FlipsArgs {
    #[arg(long, default_value = "f0")]
    pub query: Query,
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
    #[arg(long, default_value_t = 1024)]
    pub universe: u64,
    #[arg(long, default_value_t = 100_000)]
    pub length: u64,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, default_value = "bernoulli:p=0.1")]
    pub sampler: SamplerKind,
    /// `prefix:N` or a set-system file.
    #[arg(long, default_value = "prefix:1000")]
    pub system: String,
    #[arg(long, default_value_t = 1000)]
    pub length: u64,
    /// Chi-square test of which stream positions end up sampled.
    #[arg(long)]
    pub uniformity: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Policy {
    Truncate,
    Pad,
}

#[derive(Debug, Args)]
pub struct AttackIntervalArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: u64,
    /// Sampling rate; required unless `--robust` is given.
    #[arg(long, required_unless_present = "robust")]
    pub p: Option<f64>,
    /// Use the robust rate for `--ranges`, `--eps`, `--delta`, `--n`.
    #[arg(long)]
    pub robust: bool,
    #[arg(long, default_value_t = 0.25)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// Range count for the robust rate (default: `--universe`).
    #[arg(long)]
    pub ranges: Option<u64>,
    #[arg(long, default_value_t = 1 << 40)]
    pub universe: u64,
    #[arg(long, value_enum, default_value = "truncate")]
    pub policy: Policy,
    /// Error counted as success (default 1/2, or eps with `--robust`).
    #[arg(long)]
    pub threshold: Option<f64>,
    /// JSONL transcript of trial 0.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AttackGapnormArgs {
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub r: usize,
    #[arg(long, default_value_t = 2.0)]
    pub gap: f64,
    #[arg(long, default_value_t = 100)]
    pub attack_rounds: usize,
    /// Probes per learning round (default 2n²).
    #[arg(long)]
    pub m_probe: Option<usize>,
    #[arg(long)]
    pub transcript: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KmvTargetArg {
    Single,
    Switcher,
    Both,
}

#[derive(Debug, Args)]
pub struct AttackKmvArgs {
    #[arg(long, default_value_t = 1024)]
    pub k: usize,
    #[arg(long, default_value_t = 0.3)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 10_000)]
    pub rounds: usize,
    #[arg(long, value_enum, default_value = "both")]
    pub target: KmvTargetArg,
    #[arg(long)]
    pub transcript: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DimsArgs {
    /// `prefix:N` or a set-system file.
    #[arg(long, required_unless_present = "random")]
    pub system: Option<String>,
    /// Include a witnessing mistake tree in the report.
    #[arg(long)]
    pub tree: bool,
    /// Check VC <= Ldim on this many random systems instead.
    #[arg(long)]
    pub random: Option<u64>,
    #[arg(long, default_value_t = 6)]
    pub max_universe: usize,
    #[arg(long, default_value_t = 20)]
    pub max_ranges: usize,
}

#[derive(Debug, Args)]
pub struct DiscArgs {
    #[arg(long, default_value = "prefix:64")]
    pub system: String,
    /// Game length 2k.
    #[arg(long, default_value_t = 200)]
    pub rounds: usize,
    #[arg(long, default_value = "random")]
    pub painter: advstream::learnability::PainterStrategy,
    #[arg(long, default_value = "uniform")]
    pub items: advstream::learnability::ItemStrategy,
    /// JSON report with the disc histogram.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub transcript: PathBuf,
    /// Sampler spec (`bernoulli:p=0.01`) or `kmv:k=1024`.
    #[arg(long)]
    pub defender: String,
    /// Defender seed (default: the one in the transcript header).
    #[arg(long)]
    pub defender_seed: Option<u64>,
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let argv = match config::merge(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(w) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("config error: workers: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
