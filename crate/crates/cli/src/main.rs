//! `recmarket`: analyze and simulate recommender markets on influence graphs.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use recmarket::analysis::{DEFAULT_EPSILON, DEFAULT_TOLERANCE};
use recmarket::simulation::RecommendationRule;
use recmarket::SupernodePolicy;

#[derive(Debug, Parser)]
#[command(name = "recmarket", version, about = "Steady states, influence and simulations of recommender markets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Influence vector, steady state and market distortion.
    Analyze(AnalyzeArgs),
    /// Monte Carlo runs of the purchase process with convergence diagnostics.
    Simulate(SimulateArgs),
    /// Influence and distortion before and after adding a node that every
    /// user follows and that always recommends the focus product.
    Supernode(SupernodeArgs),
    /// Inequality of the influence vector and influencer classification.
    Rank(RankArgs),
}

/// Where the model comes from. Flags override the `--model` file.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Edge list, one `influencer follower [weight]` pair per line.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// JSON model description.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Treat every edge as two arcs.
    #[arg(long)]
    pub undirected: bool,
    /// Read the third column as the arc weight (normalized per follower).
    #[arg(long)]
    pub weighted: bool,
    /// Edges are listed as `follower influencer`.
    #[arg(long)]
    pub reverse: bool,
    /// Probability of following a recommendation, for every user with in-arcs.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Number of products when preferences are sampled.
    #[arg(long, value_parser = clap::value_parser!(usize))]
    pub products: Option<usize>,
    /// Preference family: uniform, exponential, powerlaw or normal.
    #[arg(long)]
    pub preferences: Option<String>,
    /// Multiplier on the focus product's raw preference draw.
    #[arg(long)]
    pub imbalance: Option<f64>,
    /// Focus product.
    #[arg(long, default_value_t = 0)]
    pub product: usize,
    /// Seed for preference sampling and simulation.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Truncation bound on the influence series.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    /// Residual tolerance of the steady-state solver.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// uniform | window:W | fixed-past | periodic:a,b | superlinear:beta | always:p
    #[arg(long, default_value = "uniform")]
    pub rule: RecommendationRule,
    /// Purchases per run (default 10000 times the number of users).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub steps: Option<u64>,
    /// Number of independent runs; run `i` uses seed `seed + i`.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub seeds: u64,
    /// Steps between samples (default: the number of users).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub sample_every: Option<u64>,
    /// Fraction of samples, counted from the end, used for fits and tail statistics.
    #[arg(long, default_value_t = 0.5)]
    pub tail_fraction: f64,
}

#[derive(Debug, Args)]
pub struct SupernodeArgs {
    #[command(flatten)]
    pub common: Common,
    /// uniform (one more in-arc) or fixed:beta (weight beta in (0, 1)).
    #[arg(long, default_value = "uniform", value_parser = parse_policy)]
    pub supernode_policy: SupernodePolicy,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[command(flatten)]
    pub common: Common,
    /// Rows in each rank table.
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
    /// Follower threshold for MANY_FOLLOWERS (default: 99.9th percentile of out-degrees).
    #[arg(long)]
    pub min_followers: Option<usize>,
    /// Fraction of users, by influence, treated as top users.
    #[arg(long, default_value_t = 0.01)]
    pub top_fraction: f64,
}

fn parse_policy(s: &str) -> Result<SupernodePolicy, String> {
    if s == "uniform" {
        return Ok(SupernodePolicy::UniformRenormalize);
    }
    let beta = s
        .strip_prefix("fixed:")
        .ok_or_else(|| format!("expected `uniform` or `fixed:beta`, got `{s}`"))?;
    let beta: f64 = beta.parse().map_err(|_| format!("invalid share `{beta}`"))?;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(format!("share {beta} must lie strictly between 0 and 1"));
    }
    Ok(SupernodePolicy::FixedShare(beta))
}

/// Error carrying its exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

pub fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

pub fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => commands::analyze(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Supernode(a) => commands::supernode(&a),
        Command::Rank(a) => commands::rank(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("recmarket: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("recmarket: {e:#}");
            ExitCode::from(1)
        }
    }
}
