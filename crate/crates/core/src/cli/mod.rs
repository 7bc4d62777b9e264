//! The `spde` command line.
//!
//! Every subcommand writes its primary output to stdout (JSON or CSV) and
//! its errors to stderr. Exit codes: 0 success, 1 invalid input, 2
//! numerical failure.
//!
//! JSON configs carry a `schema` tag and reject unknown keys:
//!
//! | subcommand | schema |
//! |---|---|
//! | `simulate` | `spde.simulate/1` ([`SimConfig`]) |
//! | `bounds` | `spde.bounds/1` ([`BoundsConfig`]) |
//! | `energy` | `spde.energy/1` ([`EnergyConfig`]) |
//!
//! Smaller JSON arguments (`--domain`, `--measure`) are the bare domain and
//! measure objects, e.g. `{"kind":"Interval","L":1}` or
//! `{"kind":"Atom","y0":[0.5],"mass":1}`. They may be given inline or as a
//! path to a file.

mod commands;
pub mod config;
pub mod output;
pub mod runs;

use crate::error::{Error, Result};
use crate::spectral::Bc;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use std::io::Write;
use std::path::{Path, PathBuf};

pub use config::{BoundsConfig, EnergyConfig, EnergyMethod, ResolventQuery, BOUNDS_SCHEMA, ENERGY_SCHEMA};
pub use runs::{load_run, save_run, RunMetadata, RUN_SCHEMA};

#[derive(Parser, Debug)]
#[command(name = "spde", version, about = "Stochastic heat equations with colored noise on bounded domains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Eigenvalues and samples of the first eigenfunction.
    Eig(EigArgs),
    /// Heat kernel values or CSV grids.
    Kernel(KernelArgs),
    /// Admissibility class of initial data.
    Data(DataArgs),
    /// Renewal series table ĥ₀..ĥ_N and K̂_λ.
    Series(SeriesArgs),
    /// Bound envelopes and intermittency thresholds.
    Bounds(ConfigArgs),
    /// Noise covariance diagnostics.
    NoiseCheck(NoiseArgs),
    /// Runs an ensemble and writes a run directory.
    Simulate(SimulateArgs),
    /// Estimates from a run directory.
    Estimate(EstimateArgs),
    /// Energy over a λ grid and the excitation index fit.
    Energy(EnergyArgs),
    /// Runs the self-checks.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BcArg {
    Dirichlet,
    Neumann,
}

impl From<BcArg> for Bc {
    fn from(b: BcArg) -> Bc {
        match b {
            BcArg::Dirichlet => Bc::Dirichlet,
            BcArg::Neumann => Bc::Neumann,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RegularityArg {
    Lipschitz,
    C1alpha,
}

#[derive(Args, Debug)]
pub struct EigArgs {
    /// Domain JSON (inline or file).
    #[arg(long)]
    pub domain: String,
    #[arg(long, value_enum)]
    pub bc: BcArg,
    /// Number of eigenvalues (intervals and boxes; other domains report μ₁).
    #[arg(long, default_value_t = 10)]
    pub modes: usize,
    /// Samples per axis for the eigenfunction CSV.
    #[arg(long, default_value_t = 101)]
    pub samples: usize,
    /// Writes φ₁ samples here (columns x..., phi).
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct KernelArgs {
    #[arg(long)]
    pub domain: String,
    #[arg(long, value_enum)]
    pub bc: BcArg,
    #[arg(long)]
    pub t: f64,
    /// Source point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Option<Vec<f64>>,
    /// Target point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub y: Option<Vec<f64>>,
    /// Grid points per axis when a point is missing.
    #[arg(long, default_value_t = 51)]
    pub n: usize,
}

#[derive(Args, Debug)]
pub struct DataArgs {
    #[arg(long)]
    pub domain: String,
    #[arg(long, value_enum)]
    pub bc: BcArg,
    /// Initial measure JSON (inline or file).
    #[arg(long)]
    pub measure: String,
    #[arg(long, value_enum, default_value_t = RegularityArg::Lipschitz)]
    pub regularity: RegularityArg,
}

#[derive(Args, Debug)]
pub struct SeriesArgs {
    #[arg(long)]
    pub rho: f64,
    #[arg(long)]
    pub lambda: f64,
    /// Times, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub t_grid: Vec<f64>,
    /// Highest order N of ĥ_N.
    #[arg(long, default_value_t = 6)]
    pub n: usize,
}

#[derive(Args, Debug)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Args, Debug)]
pub struct NoiseArgs {
    #[arg(long)]
    pub beta: f64,
    /// Cells per side on the unit interval or square.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum What {
    Moments,
    Corr,
    Lyapunov,
    Energy,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    #[arg(long)]
    pub runs: PathBuf,
    #[arg(long, value_enum)]
    pub what: What,
    /// Moment order.
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// Restricts to one output time.
    #[arg(long)]
    pub t: Option<f64>,
    /// Probe point (default: every probe).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Option<Vec<f64>>,
    /// Second probe point for correlations.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x2: Option<Vec<f64>>,
    /// Fit window `a,b` for Lyapunov slopes (default: all output times).
    #[arg(long, value_delimiter = ',')]
    pub window: Option<Vec<f64>>,
    /// Jackknife groups.
    #[arg(long, default_value_t = 20)]
    pub groups: usize,
    /// Energy weighted by `Φ₁⁻²` (needs kept fields).
    #[arg(long)]
    pub weighted: bool,
}

#[derive(Args, Debug)]
pub struct EnergyArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Also writes the λ table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Fast,
    Full,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Suite::Fast)]
    pub suite: Suite,
}

/// Parses JSON, reporting the path of the offending field.
pub fn parse_json<T: DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Validation(format!("{what}: at `{path}`: {}", e.into_inner()))
    })
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Validation(format!("cannot read {}: {e}", path.display())))
}

/// Inline JSON when the argument starts with `{`, else a file path.
pub(crate) fn json_arg<T: DeserializeOwned>(arg: &str, what: &str) -> Result<T> {
    if arg.trim_start().starts_with('{') {
        parse_json(arg, what)
    } else {
        parse_json(&read_text(Path::new(arg))?, what)
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_validation() {
        1
    } else {
        2
    }
}

/// Parses `args` (including the program name) and runs the command,
/// writing results to `out` and messages to stderr.
pub fn run_with<I, S>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::run(&cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("spde: {e}");
            exit_code(&e)
        }
    }
}

/// Entry point of the `spde` binary.
pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    let code = run_with(std::env::args_os(), &mut lock);
    let _ = lock.flush();
    code
}
