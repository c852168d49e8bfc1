mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use corrseek::Error;

/// Exit codes.
pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_MARK_CAP: u8 = 2;
pub const EXIT_NO_RESULT: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "corrseek",
    version,
    about = "Find outlier-correlated pairs among ±1 vectors"
)]
pub struct Cli {
    /// Random seed.
    #[arg(long, global = true, env = "CORRSEEK_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Print warnings and progress to stderr.
    #[arg(long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic instance and its JSON sidecar.
    Generate {
        #[command(subcommand)]
        kind: GenerateKind,
    },
    /// Search for pairs with `|ip| >= rho d`.
    Detect(DetectArgs),
    /// Find the planted pair in a single matrix.
    Lightbulb(LightbulbArgs),
    /// Recover a sparse parity from noisy examples.
    Parity(ParityArgs),
    /// Decide whether two families hold an orthogonal pair.
    Ov(OvArgs),
    /// Monte Carlo check of the sampled Cartesian-sum bounds.
    Concentration(ConcentrationArgs),
    /// Write the exponent curves as CSV.
    Curves(CurvesArgs),
}

#[derive(Subcommand, Debug)]
pub enum GenerateKind {
    /// One matrix with a single planted pair.
    Lightbulb {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        rho: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Two matrices with planted pairs above `rho` and background below `tau`.
    Promise {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        tau: f64,
        #[arg(long, default_value_t = 1)]
        outliers: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Noisy examples of a hidden `k`-sparse parity.
    Parity {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        eta: f64,
        /// Number of examples.
        #[arg(long)]
        d: usize,
        #[arg(long, default_value = "instance")]
        out: PathBuf,
    },
    /// Two families of random 0/1 vectors.
    Ov {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        dprime: usize,
        /// Probability of a 1 entry.
        #[arg(long, default_value_t = 0.5)]
        density: f64,
        #[arg(long, default_value = "instance")]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
pub struct OutArgs {
    /// Output prefix; extensions are appended.
    #[arg(long, default_value = "instance")]
    pub out: PathBuf,
    /// Write PMATB1 instead of text.
    #[arg(long)]
    pub binary: bool,
}

/// Explicit sizes; all of `t`, `p` and `s` or none.
#[derive(Args, Debug, Clone)]
pub struct SizeArgs {
    #[arg(long)]
    pub t: Option<usize>,
    #[arg(long)]
    pub p: Option<u32>,
    #[arg(long)]
    pub s: Option<u64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Mark block pairs scoring at least `c rho^p s`.
    #[arg(long)]
    pub threshold_constant: Option<f64>,
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    /// Left matrix (PMAT1 or PMATB1).
    #[arg(long)]
    pub a: PathBuf,
    /// Right matrix; without it, distinct columns of `a` are searched.
    #[arg(long)]
    pub b: Option<PathBuf>,
    #[arg(long)]
    pub rho: f64,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    /// Defaults to the smallest value the thresholds allow.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Use the two-level search with inner block size `t^kappa`.
    #[arg(long)]
    pub kappa: Option<f64>,
    #[command(flatten)]
    pub sizes: SizeArgs,
    /// Abort when an iteration marks more block pairs; defaults to `n`.
    #[arg(long)]
    pub mark_cap: Option<usize>,
    /// Stop after detection and print whether anything was marked.
    #[arg(long, conflicts_with_all = ["oracle", "kappa"])]
    pub no_list: bool,
    /// Exhaustive scan instead of the search.
    #[arg(long)]
    pub oracle: bool,
    /// Use Strassen recursion above this dimension.
    #[arg(long)]
    pub strassen_cutoff: Option<usize>,
    /// JSON result file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LightbulbArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    #[arg(long)]
    pub omega: Option<f64>,
    #[command(flatten)]
    pub sizes: SizeArgs,
    /// Marked blocks of at most this many columns are scanned directly.
    #[arg(long, default_value_t = 64)]
    pub cutoff: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ParityArgs {
    /// PARITY1 example file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub eta: f64,
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    #[arg(long)]
    pub omega: Option<f64>,
    #[command(flatten)]
    pub sizes: SizeArgs,
    #[arg(long, default_value_t = 16)]
    pub retry_cap: usize,
    #[arg(long)]
    pub examples_per_round: Option<usize>,
    /// Largest total column count of the split lists.
    #[arg(long, default_value_t = 1 << 24)]
    pub budget: u128,
    /// Fresh examples for retries: a PARITY1 file, or `generator:SEED` to
    /// continue the stream `generate parity --seed SEED` started.
    #[arg(long)]
    pub more_examples_from: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct OvArgs {
    /// OV1 instance file.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub sizes: SizeArgs,
    /// Random pairs tested before the search.
    #[arg(long, default_value_t = 0)]
    pub presample: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ConcentrationArgs {
    /// Square of the vector length.
    #[arg(long)]
    pub m: u64,
    #[arg(long)]
    pub s: u64,
    #[arg(long)]
    pub xi: f64,
    #[arg(long)]
    pub eta: f64,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Panel {
    BestKnown,
    Ideal,
}

#[derive(Args, Debug)]
pub struct CurvesArgs {
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    /// Restrict to one panel.
    #[arg(long, value_enum)]
    pub panel: Option<Panel>,
    /// Custom model; writes `curves_custom.csv`.
    #[arg(long, requires = "alpha")]
    pub omega: Option<f64>,
    #[arg(long, requires = "omega")]
    pub alpha: Option<f64>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::MarkCapExceeded { .. } => EXIT_MARK_CAP,
        Error::NoPairFound | Error::RetriesExhausted { .. } => EXIT_NO_RESULT,
        _ => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(workers) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
