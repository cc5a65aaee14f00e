use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use qcontract::contract_dual::BlendForm;
use qcontract::experiments::SweepParam;
use qcontract::persistence::{ConfigDocument, EnvKind, ExplorationDoc};

/// Q-learning principals offering contracts to a best-responding agent.
///
/// Flags override values from `--config`, which override the built-in
/// defaults shown below.
#[derive(Debug, Parser)]
#[command(name = "qcontract", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One principal learning a tax rate against a best-responding agent.
    Single(SingleArgs),
    /// Two principals competing (or colluding) for one agent's effort.
    Dual(DualArgs),
    /// Repeat the dual run over a parameter grid and several seeds.
    Sweep(SweepArgs),
    /// Export the agent's best response on every tax cell.
    AgentTable(AgentTableArgs),
    /// Brute-force search for the agent-optimal break-even debt contract.
    InnesCheck(InnesArgs),
    /// Joint-profit optimum over the tax grid and closed-form checks.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct IoArgs {
    /// JSON configuration file; flags given on the command line win.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LearningArgs {
    /// Learning rate. [default: 0.1]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Discount factor. [default: 0]
    #[arg(long)]
    pub delta: Option<f64>,
    /// Iterations per run. [default: 1000000 single, 10000000 dual]
    #[arg(long)]
    pub iters: Option<u64>,
    /// Iterations between trajectory snapshots. [default: 10000]
    #[arg(long)]
    pub snapshot_every: Option<u64>,
    /// Trailing iterations over which greedy actions must stay fixed. [default: 100000]
    #[arg(long)]
    pub convergence_window: Option<u64>,
}

impl LearningArgs {
    fn apply(&self, doc: &mut ConfigDocument) {
        set(&mut doc.alpha, self.alpha);
        set(&mut doc.delta, self.delta);
        set(&mut doc.t_max, self.iters);
        set(&mut doc.snapshot_every, self.snapshot_every);
        set(&mut doc.convergence_window, self.convergence_window);
    }
}

#[derive(Debug, Args)]
pub struct SingleArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[command(flatten)]
    pub learning: LearningArgs,
    /// Fixed exploration rate. [default: 0.2]
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Number of tax levels on [0, 1]. [default: 101]
    #[arg(long = "d-p", visible_alias = "grid")]
    pub d_p: Option<usize>,
    /// Investment. [default: 1]
    #[arg(long = "i1", visible_alias = "i")]
    pub i1: Option<f64>,
    /// Top payoff. [default: 2]
    #[arg(long = "t1", visible_alias = "t")]
    pub t1: Option<f64>,
    /// Effort cost coefficient. [default: 2]
    #[arg(long)]
    pub c: Option<f64>,
    /// Random seed. [default: 1]
    #[arg(long)]
    pub seed: Option<u64>,
}

impl SingleArgs {
    pub fn overrides(&self) -> ConfigDocument {
        let mut doc = ConfigDocument { env: Some(EnvKind::Single), ..Default::default() };
        self.learning.apply(&mut doc);
        set(&mut doc.exploration, self.epsilon.map(ExplorationDoc::Fixed));
        set(&mut doc.d_p, self.d_p);
        set(&mut doc.i1, self.i1);
        set(&mut doc.t1, self.t1);
        set(&mut doc.c, self.c);
        set(&mut doc.seed, self.seed);
        doc
    }
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Investment in project 1. [default: 1]
    #[arg(long)]
    pub i1: Option<f64>,
    /// Investment in project 2. [default: 1]
    #[arg(long)]
    pub i2: Option<f64>,
    /// Top payoff of project 1. [default: 2]
    #[arg(long)]
    pub t1: Option<f64>,
    /// Top payoff of project 2. [default: 2]
    #[arg(long)]
    pub t2: Option<f64>,
    /// Effort cost coefficient. [default: 2]
    #[arg(long)]
    pub c: Option<f64>,
    /// Cost asymmetry in favour of project 1, in [0, 1). [default: 0]
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Weight on the joint profit, in [0, 0.5]. [default: 0]
    #[arg(long)]
    pub beta: Option<f64>,
    /// Number of tax levels on [0, 1]. [default: 101]
    #[arg(long = "d-p")]
    pub d_p: Option<usize>,
    /// Number of effort levels on [0, 1]. [default: 101]
    #[arg(long = "d-e")]
    pub d_e: Option<usize>,
    /// Reward blend: algorithm2 (raw profits) or section54 (margin-scaled). [default: algorithm2]
    #[arg(long = "blend-form")]
    pub blend_form: Option<BlendForm>,
}

impl ModelArgs {
    fn apply(&self, doc: &mut ConfigDocument) {
        set(&mut doc.i1, self.i1);
        set(&mut doc.i2, self.i2);
        set(&mut doc.t1, self.t1);
        set(&mut doc.t2, self.t2);
        set(&mut doc.c, self.c);
        set(&mut doc.kappa, self.kappa);
        set(&mut doc.beta, self.beta);
        set(&mut doc.d_p, self.d_p);
        set(&mut doc.d_e, self.d_e);
        set(&mut doc.blend_form, self.blend_form);
    }

    pub fn overrides(&self) -> ConfigDocument {
        let mut doc = ConfigDocument { env: Some(EnvKind::Dual), ..Default::default() };
        self.apply(&mut doc);
        doc
    }
}

#[derive(Debug, Args)]
pub struct ExplorationArgs {
    /// Exploration decay rate k in exp(-k t). [default: 0.000005]
    #[arg(long, conflicts_with = "epsilon")]
    pub k: Option<f64>,
    /// Fixed exploration rate instead of the decaying schedule.
    #[arg(long)]
    pub epsilon: Option<f64>,
}

impl ExplorationArgs {
    fn apply(&self, doc: &mut ConfigDocument) {
        if let Some(k) = self.k {
            doc.exploration = Some(ExplorationDoc::ExpDecay(k));
        }
        if let Some(eps) = self.epsilon {
            doc.exploration = Some(ExplorationDoc::Fixed(eps));
        }
    }
}

#[derive(Debug, Args)]
pub struct DualArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[command(flatten)]
    pub learning: LearningArgs,
    #[command(flatten)]
    pub exploration: ExplorationArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Same as --d-p.
    #[arg(long = "grid", conflicts_with = "d_p")]
    pub grid: Option<usize>,
    /// Random seed. [default: 1]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write agent_table.csv.
    #[arg(long)]
    pub dump_agent_table: bool,
}

impl DualArgs {
    pub fn overrides(&self) -> ConfigDocument {
        let mut doc = self.model.overrides();
        self.learning.apply(&mut doc);
        self.exploration.apply(&mut doc);
        set(&mut doc.d_p, self.grid);
        set(&mut doc.seed, self.seed);
        doc
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[command(flatten)]
    pub learning: LearningArgs,
    #[command(flatten)]
    pub exploration: ExplorationArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Parameter to sweep: beta, kappa, alpha or k.
    #[arg(long)]
    pub param: SweepParam,
    /// Comma-separated parameter values.
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    pub grid: Vec<f64>,
    /// Use seeds 1..=N. [default: 20]
    #[arg(long, conflicts_with = "seed_list")]
    pub seeds: Option<u64>,
    /// Explicit comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    pub seed_list: Option<Vec<u64>>,
    /// Worker threads. Results do not depend on this. [default: number of CPUs]
    #[arg(long)]
    pub jobs: Option<usize>,
}

impl SweepArgs {
    pub fn overrides(&self) -> ConfigDocument {
        let mut doc = self.model.overrides();
        self.learning.apply(&mut doc);
        self.exploration.apply(&mut doc);
        doc
    }
}

#[derive(Debug, Args)]
pub struct AgentTableArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// JSON configuration file; flags given on the command line win.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Tax of principal 1 for the best-response comparison (needs --p2).
    #[arg(long, requires = "p2")]
    pub p1: Option<f64>,
    /// Tax of principal 2 for the best-response comparison (needs --p1).
    #[arg(long, requires = "p1")]
    pub p2: Option<f64>,
}

#[derive(Debug, Args)]
pub struct InnesArgs {
    /// Payoff in the high state.
    #[arg(long, default_value_t = 2.0)]
    pub xh: f64,
    /// Payoff in the low state.
    #[arg(long, default_value_t = 1.0)]
    pub xl: f64,
    /// Investment to be repaid in expectation.
    #[arg(long, default_value_t = 1.1)]
    pub i: f64,
    /// Effort cost coefficient.
    #[arg(long, default_value_t = 2.0)]
    pub c: f64,
    /// Repayment lattice step.
    #[arg(long, default_value_t = 0.001)]
    pub step: f64,
    /// Largest accepted break-even residual.
    #[arg(long, default_value_t = 0.002)]
    pub tol: f64,
}

fn set<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}
