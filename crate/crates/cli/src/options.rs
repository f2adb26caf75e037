use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hetnet_core::{BoxPolicy, GainDistribution};

#[derive(Debug, Parser)]
#[command(name = "hetnet", version, about = "Robust power minimization for OFDMA heterogeneous networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scenario
    Gen(GenArgs),
    /// Build a piecewise rate approximation and certify it
    Fit(FitArgs),
    /// Solve the deterministic or robust program
    Solve(SolveArgs),
    /// Monte Carlo validation of a solved result
    Validate(ValidateArgs),
    /// Solve across grids of sigma values and probability levels
    Sweep(SweepArgs),
    /// Branch and bound over associations
    Bnb(BnbArgs),
}

fn positive_usize(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn probability(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not in (0, 1)"))
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be a finite non-negative number"))
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Number of users
    #[arg(long, value_parser = positive_usize)]
    pub n: usize,
    /// Number of base stations
    #[arg(long, value_parser = positive_usize)]
    pub bs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Shadowing standard deviation in dB
    #[arg(long, default_value_t = 3.0, value_parser = non_negative)]
    pub sigma: f64,
    /// Side of the square deployment area in meters
    #[arg(long, default_value_t = 1000.0)]
    pub area: f64,
    #[arg(long, default_value_t = 2e4)]
    pub demand_min: f64,
    #[arg(long, default_value_t = 1e5)]
    pub demand_max: f64,
    #[arg(long, default_value_t = 2e7)]
    pub bandwidth: f64,
    #[arg(long, default_value_t = 1.0)]
    pub p_max: f64,
    #[arg(long, default_value_t = 1e-13)]
    pub noise: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// paper-m5 or fit:<m>,<s_min>,<s_max>
    #[arg(long, default_value = "fit:5,0.01,100")]
    pub approx: String,
    /// Certification range as <s_min>,<s_max>; defaults to the fit range
    #[arg(long)]
    pub range: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Deterministic,
    Robust,
}

/// Flags shared by every command that builds and solves a program.
#[derive(Debug, Args, Clone)]
pub struct ProblemArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Robust)]
    pub mode: Mode,
    /// Violation probability of each user's chance constraint
    #[arg(long, default_value_t = 0.0993, value_parser = probability)]
    pub alpha: f64,
    /// Multiplier applied to every shadowing standard deviation
    #[arg(long, default_value_t = 1.0, value_parser = non_negative)]
    pub sigma_scale: f64,
    /// Replace every shadowing standard deviation by this value (dB)
    #[arg(long, value_parser = non_negative)]
    pub sigma: Option<f64>,
    #[arg(long, default_value = "one-sided", value_parser = parse_policy)]
    pub box_policy: BoxPolicy,
    /// paper-m5 or fit:<m>,<s_min>,<s_max>
    #[arg(long, default_value = "paper-m5")]
    pub approx: String,
}

fn parse_policy(s: &str) -> Result<BoxPolicy, String> {
    s.parse().map_err(|e: hetnet_core::Error| e.to_string())
}

fn parse_dist(s: &str) -> Result<GainDistribution, String> {
    s.parse().map_err(|e: hetnet_core::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// fixed:<file>, greedy, enumerate or bnb
    #[arg(long, default_value = "greedy")]
    pub assoc: String,
    /// Also write the uncertainty box used by robust mode
    #[arg(long)]
    pub box_out: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub result: PathBuf,
    /// Uncertainty box for the outside-box column
    #[arg(long = "box")]
    pub box_file: Option<PathBuf>,
    /// lognormal, uniform:<k> or student:<dof>
    #[arg(long, default_value = "lognormal", value_parser = parse_dist)]
    pub dist: GainDistribution,
    #[arg(long, default_value_t = 100_000, value_parser = positive_usize)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Multiplier applied to every shadowing standard deviation when sampling
    #[arg(long, default_value_t = 1.0, value_parser = non_negative)]
    pub sigma_scale: f64,
    /// Comma-separated demand multipliers for a stress table
    #[arg(long, value_delimiter = ',')]
    pub stress: Vec<f64>,
    /// CSV report; a JSON summary is written next to it
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Sigma values (dB) swept at the fixed probability
    #[arg(long, value_delimiter = ',', value_parser = non_negative)]
    pub sigmas: Vec<f64>,
    /// Probability level used for the sigma grid
    #[arg(long, default_value_t = 0.9, value_parser = probability)]
    pub prob: f64,
    /// Probability levels swept at the fixed sigma
    #[arg(long, value_delimiter = ',', value_parser = probability)]
    pub probs: Vec<f64>,
    /// Sigma value (dB) used for the probability grid; defaults to the scenario's own
    #[arg(long = "at-sigma", value_parser = non_negative)]
    pub at_sigma: Option<f64>,
    #[arg(long, default_value = "greedy")]
    pub assoc: String,
    #[arg(long, default_value_t = 1, value_parser = positive_usize)]
    pub workers: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BnbArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value_t = 100_000, value_parser = positive_usize)]
    pub node_limit: usize,
    #[arg(long, default_value_t = 1e-4, value_parser = non_negative)]
    pub rel_gap: f64,
    #[arg(long)]
    pub out: PathBuf,
}
