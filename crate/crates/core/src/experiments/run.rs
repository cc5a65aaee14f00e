use std::sync::atomic::{AtomicBool, Ordering};

use super::{convergence_check, effective_tax_rate, Environment, RunConfig, RunResult, Snapshot};
use crate::contract_dual::{agent_profit, principal_profits, AgentDecisionTable, DualContractParams, EffortPair};
use crate::contract_single::{single_step_profits, SingleContractParams};
use crate::error::{Error, Result};
use crate::qcore::{explore, init_qtable, rng_from_seed, QTable};

/// Iterations between checks of the cancellation flag.
const CANCEL_POLL: u64 = 1 << 16;

/// Runs whichever environment `config` selects.
pub fn run(config: &RunConfig) -> Result<RunResult> {
    run_with_cancel(config, None)
}

pub fn run_with_cancel(config: &RunConfig, cancel: Option<&AtomicBool>) -> Result<RunResult> {
    match &config.env {
        Environment::Single(_) => single_loop(config, cancel),
        Environment::Dual(params) => {
            config.validate()?;
            let table = AgentDecisionTable::build(params)?;
            dual_loop(config, params, &table, cancel)
        }
    }
}

/// One principal learning a tax rate against a best-responding agent.
///
/// Per iteration: exploration coin at `epsilon_at(t)`, action draw if
/// exploring, otherwise argmax; the agent's continuous best response fixes
/// the net profit; the chosen cell is updated with `delta` from the config
/// (zero in the baseline).
pub fn run_single(config: &RunConfig) -> Result<RunResult> {
    single_loop(config, None)
}

fn single_loop(config: &RunConfig, cancel: Option<&AtomicBool>) -> Result<RunResult> {
    config.validate()?;
    let Environment::Single(params) = config.env else {
        return Err(Error::config("env", "run_single needs a single-principal environment"));
    };
    let d_p = params.tax_levels;
    let profits: Vec<f64> = (0..d_p)
        .map(|i| single_step_profits(params.tax(i), &params).map(|s| s.principal))
        .collect::<Result<_>>()?;

    let mut rng = rng_from_seed(config.seed);
    let mut q = init_qtable(1, d_p, &mut rng)?;
    let mut explorations = 0u64;
    let mut visits = vec![0u64; d_p];
    let mut snapshots = Vec::with_capacity(snapshot_capacity(config));

    for t in 0..config.t_max {
        poll_cancel(cancel, t)?;
        let eps = config.exploration.epsilon_at(t);
        let action = match explore(d_p, eps, &mut rng) {
            Some(a) => {
                explorations += 1;
                a
            }
            None => q.greedy(0),
        };
        q.update(0, action, profits[action], 0, &config.learning)?;
        visits[action] += 1;

        let done = t + 1;
        if done % config.snapshot_every == 0 || done == config.t_max {
            snapshots.push(single_snapshot(done, eps, &q, &params)?);
        }
    }

    let last = snapshots.last().expect("t_max >= 1").clone();
    let converged = convergence_check(&snapshots, config.convergence_window).is_converged();
    Ok(RunResult {
        config: *config,
        final_actions: last.greedy_actions.clone(),
        final_taxes: last.taxes.clone(),
        effective_tax_final: last.effective_tax,
        snapshots,
        q_tables: vec![q],
        converged,
        explorations: vec![explorations],
        updates: vec![visits.iter().sum()],
        visits: vec![visits],
    })
}

fn single_snapshot(t: u64, eps: f64, q: &QTable, params: &SingleContractParams) -> Result<Snapshot> {
    let a = q.greedy(0);
    let tax = params.tax(a);
    let step = single_step_profits(tax, params)?;
    Ok(Snapshot {
        t,
        epsilon: eps,
        greedy_actions: vec![a],
        taxes: vec![tax],
        effort: EffortPair::new(step.effort, 0.0),
        greedy_profits: vec![step.principal],
        agent_profit: step.agent,
        effective_tax: tax,
    })
}

/// Two principals learning simultaneously; builds the agent table first.
pub fn run_dual(config: &RunConfig) -> Result<RunResult> {
    config.validate()?;
    let params = config
        .dual_params()
        .ok_or_else(|| Error::config("env", "run_dual needs a dual environment"))?;
    let table = AgentDecisionTable::build(params)?;
    dual_loop(config, params, &table, None)
}

/// [`run_dual`] against a prebuilt agent table, which may be shared
/// between concurrent runs.
pub fn run_dual_with_table(
    config: &RunConfig,
    table: &AgentDecisionTable,
    cancel: Option<&AtomicBool>,
) -> Result<RunResult> {
    config.validate()?;
    let params = config
        .dual_params()
        .ok_or_else(|| Error::config("env", "run_dual needs a dual environment"))?;
    if !table.matches(params) {
        return Err(Error::InvalidArgument(
            "agent table was built for a different agent problem".into(),
        ));
    }
    dual_loop(config, params, table, cancel)
}

/// Per iteration, in this RNG order: principal 1's coin, principal 1's
/// action draw if exploring, principal 2's coin, principal 2's draw. The
/// agent's reply is looked up in the table and each principal updates its
/// own table with its blended reward.
fn dual_loop(
    config: &RunConfig,
    params: &DualContractParams,
    table: &AgentDecisionTable,
    cancel: Option<&AtomicBool>,
) -> Result<RunResult> {
    config.validate()?;
    let d_p = params.tax_levels;
    // rewards[i * d_p + j] = blended rewards when the principals play (i, j)
    let rewards: Vec<[f64; 2]> = (0..d_p * d_p)
        .map(|cell| {
            let (i, j) = (cell / d_p, cell % d_p);
            params.rewards(params.tax(i), params.tax(j), table.effort(i, j))
        })
        .collect();

    let mut rng = rng_from_seed(config.seed);
    let mut q1 = init_qtable(1, d_p, &mut rng)?;
    let mut q2 = init_qtable(1, d_p, &mut rng)?;
    let mut explorations = [0u64; 2];
    let mut visits = [vec![0u64; d_p], vec![0u64; d_p]];
    let mut snapshots = Vec::with_capacity(snapshot_capacity(config));

    for t in 0..config.t_max {
        poll_cancel(cancel, t)?;
        let eps = config.exploration.epsilon_at(t);
        let a1 = match explore(d_p, eps, &mut rng) {
            Some(a) => {
                explorations[0] += 1;
                a
            }
            None => q1.greedy(0),
        };
        let a2 = match explore(d_p, eps, &mut rng) {
            Some(a) => {
                explorations[1] += 1;
                a
            }
            None => q2.greedy(0),
        };
        let [r1, r2] = rewards[a1 * d_p + a2];
        q1.update(0, a1, r1, 0, &config.learning)?;
        q2.update(0, a2, r2, 0, &config.learning)?;
        visits[0][a1] += 1;
        visits[1][a2] += 1;

        let done = t + 1;
        if done % config.snapshot_every == 0 || done == config.t_max {
            snapshots.push(dual_snapshot(done, eps, [q1.greedy(0), q2.greedy(0)], params, table));
        }
    }

    let last = snapshots.last().expect("t_max >= 1").clone();
    let converged = convergence_check(&snapshots, config.convergence_window).is_converged();
    Ok(RunResult {
        config: *config,
        final_actions: last.greedy_actions.clone(),
        final_taxes: last.taxes.clone(),
        effective_tax_final: last.effective_tax,
        snapshots,
        q_tables: vec![q1, q2],
        converged,
        explorations: explorations.to_vec(),
        updates: visits.iter().map(|v| v.iter().sum()).collect(),
        visits: visits.to_vec(),
    })
}

fn dual_snapshot(
    t: u64,
    eps: f64,
    actions: [usize; 2],
    params: &DualContractParams,
    table: &AgentDecisionTable,
) -> Snapshot {
    let (p1, p2) = (params.tax(actions[0]), params.tax(actions[1]));
    let effort = table.effort(actions[0], actions[1]);
    let (pi1, pi2) = principal_profits(p1, p2, effort, params);
    Snapshot {
        t,
        epsilon: eps,
        greedy_actions: actions.to_vec(),
        taxes: vec![p1, p2],
        effort,
        greedy_profits: vec![pi1, pi2],
        agent_profit: agent_profit(p1, p2, effort, params),
        effective_tax: effective_tax_rate(p1, p2, effort),
    }
}

fn snapshot_capacity(config: &RunConfig) -> usize {
    (config.t_max / config.snapshot_every + 1).min(1 << 20) as usize
}

#[inline]
fn poll_cancel(cancel: Option<&AtomicBool>, t: u64) -> Result<()> {
    if t % CANCEL_POLL == 0 {
        if let Some(flag) = cancel {
            if flag.load(Ordering::Relaxed) {
                return Err(Error::Cancelled);
            }
        }
    }
    Ok(())
}
