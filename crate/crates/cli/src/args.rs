use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::config::{GridSpec, ProblemSource};

#[derive(Debug, Parser)]
#[command(name = "bpri", version, about = "Gibbs-channel solvers and paper experiments")]
pub struct Cli {
    /// Directory for artifacts.
    #[arg(long, global = true, env = "BPRI_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,

    /// JSON file whose keys override the subcommand flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Show information in bits in the summary line.
    #[arg(long, global = true)]
    pub bits: bool,

    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Gibbs channel at a fixed price.
    Solve(SolveArgs),
    /// Loss-minimizing channel under an information budget.
    Capacity(CapacityArgs),
    /// Utility-capacity frontier over a lambda grid.
    Frontier(FrontierArgs),
    /// Stochastic Blahut-Arimoto trajectory.
    Sba(SbaArgs),
    /// Monte Carlo curvature table for the multinomial logit.
    MnlMc(MnlMcArgs),
    /// Curvature and Fisher information of the three-option logit.
    TriChoice(TriChoiceArgs),
    /// Linear shrinkage risk for one mean vector.
    Stein(SteinArgs),
    /// Optimal shrinkage across dimensions against James-Stein and the MLE.
    SteinHighdim(SteinHighdimArgs),
    /// Gaussian attention: scalar rule or matrix gain.
    Lqg(LqgArgs),
    /// Soft Bellman plan for a finite MDP.
    Bellman(BellmanArgs),
    /// Randomized invariant suite.
    Selftest(SelftestArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::Capacity(_) => "capacity",
            Command::Frontier(_) => "frontier",
            Command::Sba(_) => "sba",
            Command::MnlMc(_) => "mnl-mc",
            Command::TriChoice(_) => "tri-choice",
            Command::Stein(_) => "stein",
            Command::SteinHighdim(_) => "stein-highdim",
            Command::Lqg(_) => "lqg",
            Command::Bellman(_) => "bellman",
            Command::Selftest(_) => "selftest",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

fn parse_problem(s: &str) -> Result<ProblemSource, String> {
    Ok(ProblemSource::Path(PathBuf::from(s)))
}

fn parse_grid(s: &str) -> Result<GridSpec, String> {
    Ok(GridSpec::Text(s.to_string()))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveArgs {
    /// Problem JSON: `{"prior": [...], "loss": [[...]]}` or `"utility"` instead of `"loss"`.
    #[arg(long, value_parser = parse_problem)]
    pub problem: Option<ProblemSource>,
    #[arg(long, conflicts_with = "price")]
    pub lambda: Option<f64>,
    /// Information price, the reciprocal of lambda.
    #[arg(long)]
    pub price: Option<f64>,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
    #[arg(long, default_value = "solve.json")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityArgs {
    #[arg(long, value_parser = parse_problem)]
    pub problem: Option<ProblemSource>,
    /// Information budget in nats.
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long, default_value_t = 1e-9)]
    pub tol_kappa: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value = "capacity.json")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontierArgs {
    #[arg(long, value_parser = parse_problem)]
    pub problem: Option<ProblemSource>,
    /// `lo:hi:step`, `log:lo:hi:n`, or a comma list.
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<GridSpec>,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, default_value = "frontier.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SbaArgs {
    #[arg(long, value_parser = parse_problem)]
    pub problem: Option<ProblemSource>,
    #[arg(long, conflicts_with = "price")]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub price: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 200_000)]
    pub steps: usize,
    /// Standard deviation of additive Gaussian noise on the Gibbs row; 0 for none.
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    /// Step schedule `a / (b + t)`.
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long, default_value_t = 10.0)]
    pub b: f64,
    #[arg(long, default_value_t = 1)]
    pub batch: usize,
    #[arg(long, default_value_t = 100)]
    pub log_stride: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, default_value = "sba.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MnlMcArgs {
    /// Number of alternatives.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Number of utility draws.
    #[arg(long, default_value_t = 4000)]
    pub b: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_grid, default_value = "0.3:2.5:0.2")]
    pub grid: Option<GridSpec>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, default_value = "mnl_mc.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriChoiceArgs {
    /// Utility gap values.
    #[arg(long, value_parser = parse_grid, default_value = "0.5,1,2")]
    pub theta: Option<GridSpec>,
    #[arg(long, value_parser = parse_grid, default_value = "log:0.05:20:60")]
    pub grid: Option<GridSpec>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, default_value = "tri_choice.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteinArgs {
    /// Dimension of the default sparse mean `(1, 0.5, 0.25, 0, ...)`.
    #[arg(long, default_value_t = 10)]
    pub p: usize,
    /// Explicit mean vector; overrides `--p`.
    #[arg(long, value_delimiter = ',')]
    pub theta: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.5)]
    pub tau2: f64,
    /// Evaluate this lambda in addition to the optimum.
    #[arg(long, conflicts_with = "price")]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub price: Option<f64>,
    /// Seed for a Monte Carlo check of the analytic risk.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 200_000)]
    pub reps: usize,
    #[arg(long, default_value = "stein.json")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteinHighdimArgs {
    #[arg(long, value_delimiter = ',', default_value = "3,5,10,20,50,100")]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub tau2: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 20_000)]
    pub reps: usize,
    #[arg(long, default_value = "stein_highdim.csv")]
    pub out: PathBuf,
    /// Risk curves over the default lambda grid.
    #[arg(long, default_value = "stein_risk_curves.csv")]
    pub curves_out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqgArgs {
    /// Matrix problem JSON `{"sigma_x": [[...]], "q": [[...]]}`; scalar mode when absent.
    #[arg(long)]
    pub problem: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_x2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long, conflicts_with = "price")]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub price: Option<f64>,
    /// Grid size of the discretized reference solve.
    #[arg(long, default_value_t = 41)]
    pub n_grid: usize,
    #[arg(long, default_value = "lqg.json")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BellmanArgs {
    /// MDP JSON file.
    #[arg(long)]
    pub mdp: Option<PathBuf>,
    #[arg(long, conflicts_with = "price")]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub price: Option<f64>,
    /// Overrides the horizon in the MDP file.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Solve the discounted infinite-horizon problem instead.
    #[arg(long)]
    pub stationary: bool,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, default_value = "bellman.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 20240601)]
    pub seed: u64,
    #[arg(long, default_value = "selftest.json")]
    pub out: PathBuf,
}
