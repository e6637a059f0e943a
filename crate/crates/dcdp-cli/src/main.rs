//! `dcdp` binary: detection on CSV data, synthetic benchmarks, and penalty
//! tuning, with machine-readable reports.

mod cmds;
mod input;
mod presets;
mod report;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dcdp::cache::CacheMode;
use dcdp::data::ModelFamily;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(
    name = "dcdp",
    version,
    about = "Offline multiple change point detection"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect change points in a CSV file.
    Detect(DetectArgs),
    /// Generate a synthetic series and its true change points.
    Simulate(SimulateArgs),
    /// Run repeated simulate-detect trials and summarize them.
    Bench(BenchArgs),
    /// Cross-validate penalty candidates on a CSV file.
    Tune(TuneArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Mean,
    Regression,
    Graphical,
}

impl From<FamilyArg> for ModelFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Mean => ModelFamily::Mean,
            FamilyArg::Regression => ModelFamily::Regression,
            FamilyArg::Graphical => ModelFamily::Graphical,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CacheModeArg {
    Auto,
    Prefix,
    Streamed,
}

impl From<CacheModeArg> for CacheMode {
    fn from(m: CacheModeArg) -> Self {
        match m {
            CacheModeArg::Auto => CacheMode::Auto,
            CacheModeArg::Prefix => CacheMode::Prefix,
            CacheModeArg::Streamed => CacheMode::Streamed,
        }
    }
}

/// Detector knobs shared by `detect` and `tune`. Unset values fall back to
/// the library defaults, which the report materializes.
#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Model family of the data.
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    /// Zero-based response column (regression; default: last column).
    #[arg(long)]
    pub response_col: Option<usize>,
    /// L1 penalty level; overrides the data-driven default.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Shortest interval fitted rather than gated.
    #[arg(long)]
    pub min_span: Option<usize>,
    /// Expected per-segment support size behind the default min span.
    #[arg(long)]
    pub sparsity_hint: Option<usize>,
    /// Uniform grid with this many interior nodes.
    #[arg(long, conflicts_with_all = ["grid_random", "grid_points"])]
    pub grid_q: Option<usize>,
    /// Random grid with this many nodes (see --grid-seed).
    #[arg(long, conflicts_with = "grid_points")]
    pub grid_random: Option<usize>,
    /// Seed for --grid-random.
    #[arg(long, default_value_t = 0)]
    pub grid_seed: u64,
    /// Comma-separated explicit grid nodes.
    #[arg(long, value_delimiter = ',')]
    pub grid_points: Option<Vec<usize>>,
    /// Expected smallest spacing, drives the default grid size.
    #[arg(long)]
    pub delta_min_hint: Option<usize>,
    /// Statistic storage policy.
    #[arg(long, value_enum, default_value = "auto")]
    pub cache_mode: CacheModeArg,
    /// Expected change point count behind the default gamma ladder.
    #[arg(long)]
    pub k_hint: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Headerless CSV input, one row per time index.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Fixed segment penalty; skips cross-validation.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Fixed refinement penalty; skips cross-validation.
    #[arg(long)]
    pub zeta: Option<f64>,
    /// Report the divide-step estimate without local refinement.
    #[arg(long)]
    pub no_refine: bool,
    /// Refinement window margin kept clear at both window ends.
    #[arg(long)]
    pub edge_margin: Option<usize>,
    /// Report file path.
    #[arg(long, default_value = "detect-report.json")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Model family to generate.
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    /// Number of change points.
    #[arg(long)]
    pub k: usize,
    /// Signal size per affected coordinate (mean shift or coefficient).
    #[arg(long, default_value_t = 5.0)]
    pub delta: f64,
    /// Diagonal of the alternate graphical covariance.
    #[arg(long, default_value_t = 5.0)]
    pub delta_diag: f64,
    /// Off-diagonal of the alternate graphical covariance.
    #[arg(long, default_value_t = 0.3)]
    pub delta_off: f64,
    /// Observation noise level (mean and regression).
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Change point location jitter as a fraction of the nominal spacing.
    #[arg(long, default_value_t = 0.3)]
    pub jitter: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Trial index within the seed's stream.
    #[arg(long, default_value_t = 0)]
    pub trial: u64,
    /// Data CSV path (regression appends the response as the last column).
    #[arg(long, default_value = "sim-data.csv")]
    pub output: PathBuf,
    /// True change points, one index per line.
    #[arg(long, default_value = "sim-truth.txt")]
    pub truth_output: PathBuf,
    /// Run manifest path.
    #[arg(long, default_value = "sim-manifest.json")]
    pub manifest_output: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Named benchmark setting; unknown names list the available ones.
    #[arg(long, conflicts_with = "family")]
    pub preset: Option<String>,
    /// Model family for an ad hoc setting (with --n/--p/--k).
    #[arg(long, value_enum, requires_all = ["n", "p", "k"])]
    pub family: Option<FamilyArg>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub delta_diag: Option<f64>,
    #[arg(long)]
    pub delta_off: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trials to run; defaults to 10 (20 for the refine preset).
    #[arg(long)]
    pub trials: Option<u64>,
    /// Worker thread cap; DCDP_JOBS sets the default.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Fixed segment penalty for every trial; skips cross-validation.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Fixed refinement penalty for every trial.
    #[arg(long)]
    pub zeta: Option<f64>,
    /// Uniform grid with this many interior nodes.
    #[arg(long)]
    pub grid_q: Option<usize>,
    /// Report file path.
    #[arg(long, default_value = "bench-report.json")]
    pub output: PathBuf,
    /// Per-trial (or per-sweep-point) CSV side file.
    #[arg(long, default_value = "bench-trials.csv")]
    pub csv_output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// Headerless CSV input, one row per time index.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Comma-separated gamma candidates; default is the data-scaled ladder.
    #[arg(long, value_delimiter = ',')]
    pub gammas: Option<Vec<f64>>,
    /// Comma-separated zeta candidates; default is a single data-scaled value.
    #[arg(long, value_delimiter = ',')]
    pub zetas: Option<Vec<f64>>,
    /// How gamma and zeta candidates combine.
    #[arg(long, value_enum, default_value = "zipped")]
    pub pairing: PairingArg,
    /// Report file path.
    #[arg(long, default_value = "tune-report.json")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PairingArg {
    Zipped,
    Cartesian,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().collect();
    let result = match cli.command {
        Command::Detect(args) => cmds::detect(&args, &argv),
        Command::Simulate(args) => cmds::simulate(&args, &argv),
        Command::Bench(args) => cmds::bench(&args, &argv),
        Command::Tune(args) => cmds::tune(&args, &argv),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_stderr_json());
            ExitCode::from(err.exit_code())
        }
    }
}
