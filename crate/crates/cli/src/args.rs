use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mew_core::chain::ChainMode;
use mew_core::diagnostics::DEFAULT_THIN;
use mew_core::enumeration::DEFAULT_WORK_LIMIT;
use mew_core::state::{BalanceMode, BalanceSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "mew", version, about = "Marked edge walk sampler for balanced graph partitions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", content = "args", rename_all = "kebab-case")]
pub enum Command {
    /// Run an ensemble of chains and write their records.
    Run(RunArgs),
    /// Count balanced partitions (or lifted states) exhaustively.
    Enumerate(EnumerateArgs),
    /// Pairwise KS convergence curves from chain record files.
    Diagnose(DiagnoseArgs),
    /// Mean pairwise 2D KS distance over a grid of energy term centers.
    Sweep(SweepArgs),
    /// Spanning tree counts of a partition's parts and quotient graph.
    TreeCount(TreeCountArgs),
    /// Moments of the uncorrected exponential-proposal toy sampler.
    ToyTilt(ToyTiltArgs),
    /// Independent two-part samples from the spanning tree distribution.
    Baseline(BaselineArgs),
    /// Repeat the command recorded in a manifest.
    Rerun(RerunArgs),
}

impl Command {
    /// Redirects the command's output directory.
    pub fn set_out(&mut self, out: PathBuf) {
        match self {
            Command::Run(a) => a.out = out,
            Command::Enumerate(a) => a.out = out,
            Command::Diagnose(a) => a.out = out,
            Command::Sweep(a) => a.out = out,
            Command::TreeCount(a) => a.out = Some(out),
            Command::ToyTilt(a) => a.out = Some(out),
            Command::Baseline(a) => a.out = out,
            Command::Rerun(a) => a.out = out,
        }
    }

    /// Input files read by the command.
    pub fn inputs(&self) -> Vec<PathBuf> {
        match self {
            Command::Run(a) => vec![a.graph.clone(), a.energy.clone()],
            Command::Enumerate(a) => std::iter::once(a.graph.clone()).chain(a.energy.clone()).collect(),
            Command::Diagnose(a) => a.chains.iter().cloned().chain(a.target.clone()).chain(a.graph.clone()).collect(),
            Command::Sweep(a) => vec![a.graph.clone(), a.energy.clone()],
            Command::TreeCount(a) => vec![a.graph.clone(), a.assignment.clone()],
            Command::ToyTilt(_) => Vec::new(),
            Command::Baseline(a) => vec![a.graph.clone()],
            Command::Rerun(a) => vec![a.manifest.clone()],
        }
    }

    /// Rewrites every path as an absolute path so the echo works from any directory.
    pub fn absolutize(&mut self) {
        fn abs(p: &mut PathBuf) {
            if let Ok(a) = std::path::absolute(&*p) {
                *p = a;
            }
        }
        fn abs_opt(p: &mut Option<PathBuf>) {
            if let Some(p) = p {
                abs(p);
            }
        }
        match self {
            Command::Run(a) => {
                abs(&mut a.graph);
                abs(&mut a.energy);
                abs(&mut a.out);
            }
            Command::Enumerate(a) => {
                abs(&mut a.graph);
                abs_opt(&mut a.energy);
                abs(&mut a.out);
            }
            Command::Diagnose(a) => {
                a.chains.iter_mut().for_each(abs);
                abs_opt(&mut a.target);
                abs_opt(&mut a.graph);
                abs(&mut a.out);
            }
            Command::Sweep(a) => {
                abs(&mut a.graph);
                abs(&mut a.energy);
                abs(&mut a.out);
            }
            Command::TreeCount(a) => {
                abs(&mut a.graph);
                abs(&mut a.assignment);
                abs_opt(&mut a.out);
            }
            Command::ToyTilt(a) => abs_opt(&mut a.out),
            Command::Baseline(a) => {
                abs(&mut a.graph);
                abs(&mut a.out);
            }
            Command::Rerun(a) => {
                abs(&mut a.manifest);
                abs(&mut a.out);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BalanceArg {
    /// Part populations within epsilon of the ideal.
    Population,
    /// Part vertex counts within epsilon of the ideal.
    Node,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Composite,
    Single,
}

impl From<ModeArg> for ChainMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Composite => ChainMode::MetropolisComposite,
            ModeArg::Single => ChainMode::UniformSingleStep,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BalanceArgs {
    /// Relative balance tolerance, 0 <= epsilon < 1.
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value_t = BalanceArg::Population)]
    pub balance: BalanceArg,
}

impl BalanceArgs {
    pub fn spec(&self) -> BalanceSpec {
        BalanceSpec {
            mode: match self.balance {
                BalanceArg::Population => BalanceMode::Population,
                BalanceArg::Node => BalanceMode::Node,
            },
            epsilon: self.epsilon,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ChainArgs {
    /// Steps per chain.
    #[arg(long)]
    pub steps: u64,
    /// Master seed; chain seeds are derived from it.
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub burn_in: u64,
    #[arg(long, default_value_t = 1)]
    pub record_every: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Composite)]
    pub mode: ModeArg,
    /// Probability of the cycle basis step in single-step mode.
    #[arg(long, default_value_t = 0.5)]
    pub p_cycle: f64,
    /// Spanning trees tried when drawing a balanced starting state.
    #[arg(long, default_value_t = 1000)]
    pub init_attempts: usize,
    /// Worker threads; defaults to all cores. Output does not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RunArgs {
    /// Dual graph JSON.
    #[arg(long)]
    pub graph: PathBuf,
    /// Number of parts.
    #[arg(long)]
    pub districts: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub balance: BalanceArgs,
    /// Energy specification JSON.
    #[arg(long)]
    pub energy: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub chain: ChainArgs,
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    /// Include each recorded state's assignment.
    #[arg(long)]
    pub record_assignments: bool,
    /// Extra observable to record (cut_edges, mean_median, dem_share_<k>, constant_zero).
    #[arg(long = "record", value_name = "NAME")]
    pub record: Vec<String>,
    /// Recompute the state from scratch every this many steps and compare; 0 disables.
    #[arg(long, default_value_t = 0)]
    pub verify_every: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EnumerateArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub districts: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub balance: BalanceArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// List lifted states (spanning tree plus marked edges) instead of partitions.
    #[arg(long)]
    pub lifted: bool,
    /// Weight catalog entries by this energy's target mass.
    #[arg(long, conflicts_with = "lifted")]
    pub energy: Option<PathBuf>,
    /// Maximum search nodes before giving up.
    #[arg(long, default_value_t = DEFAULT_WORK_LIMIT)]
    pub work_limit: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DiagnoseArgs {
    /// Chain record files (JSON lines), at least two.
    #[arg(long, num_args = 1.., required = true)]
    pub chains: Vec<PathBuf>,
    #[arg(long)]
    pub observable: String,
    /// Second observable; switches to the 2D statistic.
    #[arg(long)]
    pub observable2: Option<String>,
    /// Enumerated catalog or record file to measure distance to.
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Dual graph, needed to evaluate observables on a catalog target.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Record counts: `a,b,c`, `log:FROM:TO:COUNT` or `linear:FROM:TO:COUNT`.
    #[arg(long)]
    pub checkpoints: String,
    #[arg(long, default_value_t = DEFAULT_THIN)]
    pub thin: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub districts: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub balance: BalanceArgs,
    #[arg(long)]
    pub energy: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// First axis: `TERM:c1,c2,...` with TERM an energy term index.
    #[arg(long)]
    pub axis1: String,
    /// Second axis, same form.
    #[arg(long)]
    pub axis2: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub chain: ChainArgs,
    #[arg(long, default_value_t = 4)]
    pub chains: usize,
    #[arg(long, default_value_t = DEFAULT_THIN)]
    pub thin: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TreeCountArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Assignment JSON: an array of labels in vertex order, or an object from vertex id to label.
    #[arg(long)]
    pub assignment: PathBuf,
    /// Also write the counts and a manifest here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ToyTiltArgs {
    /// Proposal rates; repeat for a slope fit.
    #[arg(long, num_args = 1.., required = true)]
    pub lambda: Vec<f64>,
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub mu: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub steps: u64,
    #[arg(long)]
    pub seed: u64,
    /// Include the proposal density in the acceptance ratio.
    #[arg(long)]
    pub corrected: bool,
    /// Also write the moments and a manifest here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BaselineArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub balance: BalanceArgs,
    #[arg(long)]
    pub samples: u64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub record_assignments: bool,
    /// Extra observable to record, as for `run`.
    #[arg(long = "record", value_name = "NAME")]
    pub record: Vec<String>,
    /// Spanning trees drawn per sample before giving up.
    #[arg(long, default_value_t = 100_000)]
    pub max_attempts: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RerunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory for the repeated run.
    #[arg(long)]
    pub out: PathBuf,
}
