//! Command-line front end for the sparse-channel estimation toolkit.
//!
//! Four subcommands: `bench` runs the seeded Monte Carlo experiment and
//! writes a CSV or JSON table; `verify` pits the production code against its
//! independent oracles and invariants; `scale` times the detector across
//! problem sizes and checks the complexity contract; `demo` walks one
//! instance end-to-end. The process is side-effect-free except for the
//! declared output file and the standard streams.

mod bench;
mod config;
mod demo;
mod output;
mod scale;
mod verify;

use clap::{Args, Parser, Subcommand};
use output::OutputFormat;
use sparsechan::ExperimentConfig;
use std::path::PathBuf;
use std::process::ExitCode;

/// Failure taxonomy mapped onto exit codes: 1 verification failure,
/// 2 configuration error, 3 runtime failure (0 is success). Argument-parsing
/// errors also exit with 2 via clap.
pub enum Failure {
    Verification(String),
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verification(_) => 1,
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Verification(m) | Failure::Config(m) | Failure::Runtime(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "sparsechan",
    version,
    about = "Sparse-channel estimation toolkit: exact MAP support detection on a \
             trellis, alternating estimation, baselines, and Cramér-Rao bounds."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the seeded Monte Carlo benchmark and write an MSE-vs-SNR table
    Bench(BenchArgs),
    /// Check the toolkit against its independent oracles and invariants
    Verify(VerifyArgs),
    /// Time the detector across problem sizes and check the scaling contract
    Scale(ScaleArgs),
    /// Run one seeded instance end-to-end and show what each estimator did
    Demo(DemoArgs),
}

/// Experiment parameters shared by the subcommands. Precedence:
/// built-in defaults, then the config file, then these flags.
#[derive(Args)]
pub struct OverrideArgs {
    /// Config file: flat `key = value` lines, '#' comments, unknown keys rejected
    #[arg(long, value_name = "PATH")]
    pub(crate) config: Option<PathBuf>,

    /// Channel memory (number of taps)
    #[arg(long = "M", value_name = "M")]
    pub(crate) memory: Option<usize>,

    /// Number of active taps
    #[arg(long = "K", value_name = "K")]
    pub(crate) sparsity: Option<usize>,

    /// Training sequence length
    #[arg(long = "L", value_name = "L")]
    pub(crate) training_len: Option<usize>,

    /// SNR grid in dB: "start:stop:step" (inclusive), a comma list, or one value
    #[arg(long, value_name = "A:B:STEP")]
    pub(crate) snr: Option<String>,

    /// Comma-separated algorithms to run: lse, slse, omp, omapfg
    #[arg(long, value_name = "LIST")]
    pub(crate) algos: Option<String>,

    /// Trials per SNR point
    #[arg(long, value_name = "N")]
    pub(crate) trials: Option<usize>,

    /// Convergence threshold for the alternating estimator
    #[arg(long, value_name = "EPS")]
    pub(crate) eps: Option<f64>,

    /// Iteration cap for the alternating estimator
    #[arg(long = "max-iter", value_name = "N")]
    pub(crate) max_iter: Option<usize>,

    /// Master seed; every random draw derives from it deterministically
    #[arg(long, value_name = "U64")]
    pub(crate) seed: Option<u64>,
}

impl OverrideArgs {
    /// Resolve the effective experiment configuration and validate it.
    pub fn resolve(&self) -> Result<ExperimentConfig, Failure> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            config::apply_file(&mut cfg, path).map_err(Failure::Config)?;
        }
        if let Some(v) = self.memory {
            cfg.memory = v;
        }
        if let Some(v) = self.sparsity {
            cfg.sparsity = v;
        }
        if let Some(v) = self.training_len {
            cfg.training_len = v;
        }
        if let Some(s) = &self.snr {
            cfg.snr_grid_db = config::parse_snr_grid(s).map_err(Failure::Config)?;
        }
        if let Some(s) = &self.algos {
            cfg.algorithms = config::parse_algos(s).map_err(Failure::Config)?;
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if let Some(v) = self.eps {
            cfg.eps = v;
        }
        if let Some(v) = self.max_iter {
            cfg.max_iter = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        config::validate(&cfg).map_err(Failure::Config)?;
        Ok(cfg)
    }
}

#[derive(Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub(crate) overrides: OverrideArgs,

    /// Output file; stdout when omitted
    #[arg(long, value_name = "PATH")]
    pub(crate) out: Option<PathBuf>,

    /// Output format
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub(crate) format: OutputFormat,

    /// Zero the wall_time_s column so reruns are byte-identical
    #[arg(long)]
    pub(crate) no_timing: bool,
}

#[derive(Args)]
pub struct VerifyArgs {
    /// Seed for the randomized property checks
    #[arg(long, value_name = "U64", default_value_t = 0xA1)]
    pub(crate) seed: u64,
}

#[derive(Args)]
pub struct ScaleArgs {
    /// Fixed training length for the memory sweep (M ∈ {64, 128, 256})
    #[arg(long = "L", value_name = "L", default_value_t = 4)]
    pub(crate) training_len: usize,

    /// Fixed memory for the training-length sweep (L ∈ {2..8})
    #[arg(long = "M", value_name = "M", default_value_t = 96)]
    pub(crate) memory: usize,

    /// Timed repetitions per cell (the median is reported)
    #[arg(long, value_name = "N", default_value_t = 20)]
    pub(crate) runs: usize,

    /// Write the timing table to this file as CSV (stdout always gets it too)
    #[arg(long, value_name = "PATH")]
    pub(crate) out: Option<PathBuf>,
}

#[derive(Args)]
pub struct DemoArgs {
    #[command(flatten)]
    pub(crate) overrides: OverrideArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Bench(args) => bench::run(args),
        Command::Verify(args) => verify::run(args),
        Command::Scale(args) => scale::run(args),
        Command::Demo(args) => demo::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}
