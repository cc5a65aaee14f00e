//! Executable learning runs, sweeps and the benchmarks used to read them.

mod oracle;
mod run;
mod sweep;

pub use oracle::{collusive_optimum_oracle, collusive_optimum_with_table, CollusiveOptimum};
pub use run::{run, run_dual, run_dual_with_table, run_single, run_with_cancel};
pub use sweep::{percentile, sweep, sweep_with_cancel, CellOutcome, SweepParam, SweepPoint, SweepSummary};

use serde::Serialize;

use crate::contract_dual::{DualContractParams, EffortPair};
use crate::contract_single::SingleContractParams;
use crate::error::{Error, Result};
use crate::qcore::{ExplorationSchedule, LearningParams, QTable};

/// Baseline values used whenever a run does not override them.
pub mod defaults {
    pub const ALPHA: f64 = 0.1;
    pub const DELTA: f64 = 0.0;
    pub const EPSILON: f64 = 0.2;
    pub const DECAY_K: f64 = 5e-6;
    pub const SINGLE_T_MAX: u64 = 1_000_000;
    pub const DUAL_T_MAX: u64 = 10_000_000;
    pub const SNAPSHOT_EVERY: u64 = 10_000;
    pub const CONVERGENCE_WINDOW: u64 = 100_000;
    pub const SEED: u64 = 1;
    pub const INVESTMENT: f64 = 1.0;
    pub const TOP_PAYOFF: f64 = 2.0;
    pub const EFFORT_COST: f64 = 2.0;
    pub const KAPPA: f64 = 0.0;
    pub const BETA: f64 = 0.0;
    pub const TAX_LEVELS: usize = 101;
    pub const EFFORT_LEVELS: usize = 101;
    /// Replication seeds `1..=20`.
    pub const SEEDS: std::ops::RangeInclusive<u64> = 1..=20;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Environment {
    Single(SingleContractParams),
    Dual(DualContractParams),
}

impl Environment {
    pub fn name(&self) -> &'static str {
        match self {
            Environment::Single(_) => "single",
            Environment::Dual(_) => "dual",
        }
    }

    pub fn tax_levels(&self) -> usize {
        match self {
            Environment::Single(p) => p.tax_levels,
            Environment::Dual(p) => p.tax_levels,
        }
    }

    pub fn learners(&self) -> usize {
        match self {
            Environment::Single(_) => 1,
            Environment::Dual(_) => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunConfig {
    pub env: Environment,
    pub learning: LearningParams,
    pub exploration: ExplorationSchedule,
    pub t_max: u64,
    pub snapshot_every: u64,
    pub seed: u64,
    pub convergence_window: u64,
}

impl RunConfig {
    /// Single principal baseline: fixed exploration 0.2 for 10^6 iterations.
    pub fn single_baseline() -> Self {
        Self {
            env: Environment::Single(SingleContractParams::default()),
            learning: LearningParams::default(),
            exploration: ExplorationSchedule::Fixed(defaults::EPSILON),
            t_max: defaults::SINGLE_T_MAX,
            snapshot_every: defaults::SNAPSHOT_EVERY,
            seed: defaults::SEED,
            convergence_window: defaults::CONVERGENCE_WINDOW,
        }
    }

    /// Dual baseline: `exp(-5e-6 t)` exploration for 10^7 iterations.
    pub fn dual_baseline() -> Self {
        Self {
            env: Environment::Dual(DualContractParams::default()),
            exploration: ExplorationSchedule::ExpDecay(defaults::DECAY_K),
            t_max: defaults::DUAL_T_MAX,
            ..Self::single_baseline()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match &self.env {
            Environment::Single(p) => p.validate()?,
            Environment::Dual(p) => p.validate()?,
        }
        self.learning.validate()?;
        self.exploration.validate()?;
        if self.t_max < 1 {
            return Err(Error::config("t_max", "at least one iteration is required"));
        }
        if self.snapshot_every < 1 || self.snapshot_every > self.t_max {
            return Err(Error::config(
                "snapshot_every",
                format!("must lie in [1, t_max={}], got {}", self.t_max, self.snapshot_every),
            ));
        }
        if self.convergence_window < 1 || self.convergence_window > self.t_max {
            return Err(Error::config(
                "convergence_window",
                format!("must lie in [1, t_max={}], got {}", self.t_max, self.convergence_window),
            ));
        }
        Ok(())
    }

    pub fn dual_params(&self) -> Option<&DualContractParams> {
        match &self.env {
            Environment::Dual(p) => Some(p),
            Environment::Single(_) => None,
        }
    }
}

/// State of the learners after `t` completed iterations.
///
/// Greedy quantities describe what happens if every learner plays its
/// current argmax; `epsilon` is the rate that was in effect for the last
/// completed iteration, `t - 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: u64,
    pub epsilon: f64,
    pub greedy_actions: Vec<usize>,
    pub taxes: Vec<f64>,
    pub effort: EffortPair,
    /// Net (unblended) profit of each principal.
    pub greedy_profits: Vec<f64>,
    pub agent_profit: f64,
    pub effective_tax: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub config: RunConfig,
    pub snapshots: Vec<Snapshot>,
    pub final_actions: Vec<usize>,
    pub final_taxes: Vec<f64>,
    pub q_tables: Vec<QTable>,
    pub converged: bool,
    pub effective_tax_final: f64,
    /// Iterations in which each learner took an exploratory action.
    pub explorations: Vec<u64>,
    /// Q-updates applied per learner.
    pub updates: Vec<u64>,
    /// Per learner, how often each action was played.
    pub visits: Vec<Vec<u64>>,
}

impl RunResult {
    pub fn final_snapshot(&self) -> &Snapshot {
        self.snapshots.last().expect("a run always records its final snapshot")
    }

    /// Lower of the final greedy taxes; the headline number under collusion.
    pub fn min_final_tax(&self) -> f64 {
        self.final_taxes.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Tax rate of the project that actually receives effort.
///
/// With no effort at all, the lower offer is reported. Mixed effort never
/// comes out of the agent table; if it is passed anyway, the project with
/// more effort wins, ties to project 1.
pub fn effective_tax_rate(p1: f64, p2: f64, e: EffortPair) -> f64 {
    match (e.e1 > 0.0, e.e2 > 0.0) {
        (true, false) => p1,
        (false, true) => p2,
        (false, false) => p1.min(p2),
        (true, true) => {
            if e.e2 > e.e1 {
                p2
            } else {
                p1
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceCheck {
    Stable,
    /// A greedy action differed from the final one at snapshot `t`.
    Moved { t: u64 },
    /// The snapshots do not span the requested window.
    InsufficientHistory { span: u64, window: u64 },
}

impl ConvergenceCheck {
    pub fn is_converged(&self) -> bool {
        matches!(self, ConvergenceCheck::Stable)
    }
}

impl std::fmt::Display for ConvergenceCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConvergenceCheck::Stable => write!(f, "greedy actions stable over the window"),
            ConvergenceCheck::Moved { t } => write!(f, "greedy action changed at t={t}"),
            ConvergenceCheck::InsufficientHistory { span, window } => {
                write!(f, "history spans {span} iterations, window needs {window}")
            }
        }
    }
}

/// True iff every learner's greedy action is constant over the snapshots in
/// the trailing `window` iterations.
pub fn convergence_check(snapshots: &[Snapshot], window: u64) -> ConvergenceCheck {
    let (Some(first), Some(last)) = (snapshots.first(), snapshots.last()) else {
        return ConvergenceCheck::InsufficientHistory { span: 0, window };
    };
    let span = last.t - first.t;
    if window > span {
        return ConvergenceCheck::InsufficientHistory { span, window };
    }
    let start = last.t - window;
    for s in snapshots.iter().rev().take_while(|s| s.t >= start) {
        if s.greedy_actions != last.greedy_actions {
            return ConvergenceCheck::Moved { t: s.t };
        }
    }
    ConvergenceCheck::Stable
}
