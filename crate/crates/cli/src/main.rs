//! `spreadlab`: simulation, exact oracles and checks for critical spread-out
//! lattice models.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "spreadlab", version, about, args_override_self = true)]
pub struct Cli {
    /// Flat key = value file; its entries are overridden by explicit flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: available parallelism). Results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Where to write the run manifest (default: next to the first output file, else stderr).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Properties of the spread-out step distribution D.
    Kernel(KernelArgs),
    /// Monte Carlo moments of oriented percolation clusters.
    Simulate(SimulateArgs),
    /// Continuous-time contact process, optionally against its discretizations.
    Cp(CpArgs),
    /// Exact two-point function and lace coefficients at tiny scale.
    Exact(ExactArgs),
    /// Exhaustive lattice-tree enumeration.
    Trees(TreesArgs),
    /// Generating-function tools.
    Series(SeriesArgs),
    /// Amplitude, Hölder and small-time checks on a moments CSV.
    Scaling(ScalingArgs),
    /// Run the acceptance suite.
    Verify(VerifyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Kernel(_) => "kernel",
            Command::Simulate(_) => "simulate",
            Command::Cp(_) => "cp",
            Command::Exact(_) => "exact",
            Command::Trees(_) => "trees",
            Command::Series(_) => "series",
            Command::Scaling(_) => "scaling",
            Command::Verify(_) => "verify",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct KernelArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long = "L")]
    pub range: i64,
    #[arg(long, default_value = "uniform-box")]
    pub profile: String,
    /// Orders n of sum_x |x|^n D(x) to report.
    #[arg(long, value_delimiter = ',')]
    pub moment: Vec<u32>,
    /// Wavevector k for hat D(k).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub fourier: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long = "L")]
    pub range: i64,
    /// Infection intensity.
    #[arg(long, required_unless_present = "find_pc")]
    pub p: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub eps: f64,
    /// Last generation; moments are reported at every n <= n-max unless --n-list is given.
    #[arg(long, default_value_t = 10)]
    pub n_max: u64,
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',', default_value = "0,2,4")]
    pub s: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Bisect for the critical intensity instead of estimating moments.
    #[arg(long)]
    pub find_pc: bool,
    /// Flatness window n1,n2 for --find-pc.
    #[arg(long, value_delimiter = ',', default_value = "50,200")]
    pub window: Vec<u64>,
    #[arg(long, default_value_t = 0.5)]
    pub p_lo: f64,
    #[arg(long, default_value_t = 1.5)]
    pub p_hi: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub tolerance: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CpArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long = "L")]
    pub range: i64,
    #[arg(long)]
    pub p: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    pub t_list: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0,2")]
    pub s: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Compare against oriented percolation at n = floor(t / eps) for each eps (needs a single t).
    #[arg(long, value_delimiter = ',')]
    pub sweep_eps: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON report of the sweep.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ExactArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long = "L")]
    pub range: i64,
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eps: f64,
    #[arg(long)]
    pub n_max: usize,
    /// Recompute in exact rational arithmetic and report the largest deviation.
    #[arg(long)]
    pub exact_rational: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct TreesArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long = "L")]
    pub range: i64,
    #[arg(long)]
    pub n_max: usize,
    /// Evaluate the truncated series at this p.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0,2")]
    pub s: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SeriesArgs {
    #[command(subcommand)]
    pub verb: SeriesVerb,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesFunction {
    /// (1 - z)^(-u)
    Power,
    /// e^z
    Exp,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum SeriesVerb {
    /// Coefficients a_0..a_N by contour quadrature.
    Extract {
        #[arg(long, value_enum, default_value = "power")]
        f: SeriesFunction,
        #[arg(long, default_value_t = 1.0)]
        u: f64,
        #[arg(long)]
        n_max: u32,
        /// Quadrature nodes (default max(512, 8n)).
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Coefficients of scale * (1 - z)^(-u) against the majorant.
    TauberianCheck {
        #[arg(long)]
        u: f64,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Majorant term C,u,v (repeatable; default 1,u,0).
        #[arg(long)]
        term: Vec<String>,
        #[arg(long, default_value_t = 2)]
        n_min: u32,
        #[arg(long, default_value_t = 500)]
        n_max: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lace identity residuals on an `exact` output.
    IdentityCheck {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 3)]
        r: usize,
        /// Wavenumbers along the first axis.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_value = "0,1.0471975511965976,3.141592653589793")]
        k: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// sum n^a e^(-n theta) against Gamma(a+1) theta^(-a-1).
    Riemann {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gaussian moment E|Z|^s.
    Gauss {
        #[arg(long)]
        s: f64,
        #[arg(long)]
        d: usize,
        /// norm or one_component
        #[arg(long, default_value = "norm")]
        mode: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingCheck {
    Amplitude,
    Holder,
    Dichotomy,
}

#[derive(Debug, Args, Serialize)]
pub struct ScalingArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Checks to run (default: all that apply).
    #[arg(long, value_enum, value_delimiter = ',')]
    pub check: Vec<ScalingCheck>,
    /// Amplitude window n1,n2 (default: upper half of the time grid).
    #[arg(long, value_delimiter = ',')]
    pub window: Option<Vec<f64>>,
    /// Relative tolerance of the amplitude relation.
    #[arg(long, default_value_t = 0.15)]
    pub tolerance: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    /// Reduced sample sizes; loose scaling checks only report diagnostics.
    #[arg(long, conflicts_with = "full")]
    pub quick: bool,
    #[arg(long)]
    pub full: bool,
    /// Subset of criteria to run.
    #[arg(long, value_delimiter = ',')]
    pub criteria: Option<Vec<u32>>,
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    ExitCode::from(commands::run(argv))
}
