mod args;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};

use clap::Parser;
use qcontract::contract_dual::{agent_profit, quantized_closed_form, AgentDecisionTable, DualContractParams};
use qcontract::contract_single::{innes_optimal_contract_search, InnesParams};
use qcontract::experiments::{
    collusive_optimum_with_table, defaults, run_dual_with_table, run_with_cancel, sweep_with_cancel,
    RunConfig,
};
use qcontract::persistence::{
    dump_qtable, read_config_document, write_agent_table, write_sweep_csv, write_trajectory,
    ConfigDocument,
};
use qcontract::Error;

use args::{AgentTableArgs, Cli, Command, DualArgs, InnesArgs, OracleArgs, SingleArgs, SweepArgs};

static CANCEL: AtomicBool = AtomicBool::new(false);

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NOT_FOUND: u8 = 3;
const EXIT_INTERRUPTED: u8 = 130;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = ctrlc::set_handler(|| CANCEL.store(true, Ordering::SeqCst)) {
        eprintln!("warning: cannot install interrupt handler: {e}");
    }
    let outcome = match &cli.command {
        Command::Single(a) => cmd_single(a),
        Command::Dual(a) => cmd_dual(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::AgentTable(a) => cmd_agent_table(a),
        Command::InnesCheck(a) => cmd_innes_check(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e);
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NotFound(_) => EXIT_NOT_FOUND,
        Error::Cancelled => EXIT_INTERRUPTED,
        Error::SweepCell { source, .. } => exit_code(source),
        e if e.is_config() => EXIT_CONFIG,
        _ => EXIT_IO,
    }
}

fn report(e: &Error) {
    if exit_code(e) == EXIT_INTERRUPTED {
        eprintln!("warning: interrupted; incomplete results were discarded");
        return;
    }
    eprintln!("error: {e}");
    if let Some(flag) = config_key(e).and_then(flag_for_key) {
        eprintln!("  (set with {flag})");
    }
}

fn config_key(e: &Error) -> Option<&str> {
    match e {
        Error::Config { key, .. } => Some(key),
        Error::SweepCell { source, .. } => config_key(source),
        _ => None,
    }
}

/// Command-line flag that sets a configuration key.
fn flag_for_key(key: &str) -> Option<&'static str> {
    Some(match key {
        "I1" => "--i1",
        "I2" => "--i2",
        "T1" => "--t1",
        "T2" => "--t2",
        "c" => "--c",
        "kappa" => "--kappa",
        "beta" => "--beta",
        "d_p" => "--d-p",
        "d_e" => "--d-e",
        "alpha" => "--alpha",
        "delta" => "--delta",
        "epsilon" => "--epsilon",
        "k" => "--k",
        "t_max" => "--iters",
        "snapshot_every" => "--snapshot-every",
        "convergence_window" => "--convergence-window",
        "blend_form" => "--blend-form",
        "param" => "--param",
        "jobs" => "--jobs",
        "xh" => "--xh",
        "i" => "--i",
        _ => return None,
    })
}

/// Defaults, then the config file, then the command line.
fn resolve(config: Option<&Path>, overrides: &ConfigDocument) -> Result<RunConfig, Error> {
    let base = match config {
        Some(path) => read_config_document(path)?,
        None => ConfigDocument::default(),
    };
    base.overlay(overrides).to_run_config()
}

fn dual_params(config: &RunConfig) -> &DualContractParams {
    config.dual_params().expect("overrides force the dual environment")
}

fn prepare_out(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })
}

/// Taxes on the default grid print as two decimals, other grids in full.
fn fmt_tax(p: f64, tax_levels: usize) -> String {
    if 100 % (tax_levels - 1) == 0 {
        format!("{p:.2}")
    } else {
        format!("{p:.6}")
    }
}

fn cmd_single(a: &SingleArgs) -> Result<(), Error> {
    let config = resolve(a.io.config.as_deref(), &a.overrides())?;
    let result = run_with_cancel(&config, Some(&CANCEL))?;
    prepare_out(&a.io.out)?;
    write_trajectory(&result, a.io.out.join("single_trajectory.jsonl"))?;
    dump_qtable(&result.q_tables[0], a.io.out.join("single_qtable.csv"))?;

    let last = result.final_snapshot();
    let levels = config.env.tax_levels();
    println!("final_tax={}", fmt_tax(result.final_taxes[0], levels));
    println!(
        "principal_profit={:.6} agent_profit={:.6} converged={}",
        last.greedy_profits[0], last.agent_profit, result.converged
    );
    Ok(())
}

fn cmd_dual(a: &DualArgs) -> Result<(), Error> {
    let config = resolve(a.io.config.as_deref(), &a.overrides())?;
    let params = dual_params(&config);
    let table = AgentDecisionTable::build(params)?;
    let result = run_dual_with_table(&config, &table, Some(&CANCEL))?;
    prepare_out(&a.io.out)?;
    write_trajectory(&result, a.io.out.join("dual_trajectory.jsonl"))?;
    dump_qtable(&result.q_tables[0], a.io.out.join("dual_qtable_p1.csv"))?;
    dump_qtable(&result.q_tables[1], a.io.out.join("dual_qtable_p2.csv"))?;
    if a.dump_agent_table {
        write_agent_table(&table, a.io.out.join("agent_table.csv"))?;
    }

    let levels = params.tax_levels;
    let last = result.final_snapshot();
    println!(
        "final_taxes={},{} effective_tax={}",
        fmt_tax(result.final_taxes[0], levels),
        fmt_tax(result.final_taxes[1], levels),
        fmt_tax(result.effective_tax_final, levels)
    );
    println!(
        "effort={:.2},{:.2} principal_profits={:.6},{:.6} converged={}",
        last.effort.e1, last.effort.e2, last.greedy_profits[0], last.greedy_profits[1], result.converged
    );
    Ok(())
}

fn cmd_sweep(a: &SweepArgs) -> Result<(), Error> {
    let template = resolve(a.io.config.as_deref(), &a.overrides())?;
    let seeds: Vec<u64> = match (&a.seed_list, a.seeds) {
        (Some(list), _) => list.clone(),
        (None, n) => (1..=n.unwrap_or(*defaults::SEEDS.end())).collect(),
    };
    let jobs = a
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let summary = sweep_with_cancel(&template, a.param, &a.grid, &seeds, jobs, Some(&CANCEL))?;
    prepare_out(&a.io.out)?;
    let path: PathBuf = a.io.out.join(format!("sweep_{}.csv", a.param.as_str()));
    write_sweep_csv(&summary, &path)?;

    for p in &summary.points {
        println!(
            "{}={} mean={:.4} median={:.4} p10={:.4} p90={:.4} converged={:.2} seeds={}",
            a.param.as_str(),
            p.value,
            p.mean,
            p.median,
            p.p10,
            p.p90,
            p.converged_frac,
            p.n_seeds
        );
    }
    Ok(())
}

fn cmd_agent_table(a: &AgentTableArgs) -> Result<(), Error> {
    let config = resolve(a.io.config.as_deref(), &a.model.overrides())?;
    let params = dual_params(&config);
    let table = AgentDecisionTable::build(params)?;
    prepare_out(&a.io.out)?;
    let path = a.io.out.join("agent_table.csv");
    write_agent_table(&table, &path)?;
    println!("rows={} path={}", params.tax_levels * params.tax_levels, path.display());
    Ok(())
}

fn cmd_innes_check(a: &InnesArgs) -> Result<(), Error> {
    let params = InnesParams {
        high_payoff: a.xh,
        low_payoff: a.xl,
        investment: a.i,
        effort_cost: a.c,
    };
    let opt = innes_optimal_contract_search(&params, a.step, a.tol)?;
    let verdict = if opt.contract.low == a.xl { "PASS" } else { "FAIL" };
    println!(
        "D_L*={:.6} D_H*={:.6} effort={:.6} residual={:.2e}",
        opt.contract.low, opt.contract.high, opt.effort, opt.residual
    );
    println!("{verdict}: D_L*=X_L");
    Ok(())
}

fn cmd_oracle(a: &OracleArgs) -> Result<(), Error> {
    let config = resolve(a.config.as_deref(), &a.model.overrides())?;
    let params = dual_params(&config);
    let table = AgentDecisionTable::build(params)?;
    let opt = collusive_optimum_with_table(params, &table)?;
    let levels = params.tax_levels;
    println!(
        "collusive_optimum p1={} p2={} effort={:.2},{:.2} joint_profit={:.6} served_tax={}",
        fmt_tax(opt.p1, levels),
        fmt_tax(opt.p2, levels),
        opt.effort.e1,
        opt.effort.e2,
        opt.joint_profit,
        fmt_tax(opt.served_tax, levels)
    );
    if params.kappa > 0.0 {
        let above = if opt.served_tax > 0.5 { "yes" } else { "no" };
        println!("served tax above 0.5 under cost asymmetry: {above}");
    }

    if let (Some(p1), Some(p2)) = (a.p1, a.p2) {
        let cell = |p: f64| -> Result<usize, Error> {
            let x = p * (levels - 1) as f64;
            let i = x.round();
            if !(0.0..=1.0).contains(&p) || (x - i).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "tax {p} is not on the {levels}-level grid"
                )));
            }
            Ok(i as usize)
        };
        let (i, j) = (cell(p1)?, cell(p2)?);
        let from_table = table.effort(i, j);
        let closed = quantized_closed_form(p1, p2, params);
        println!(
            "table effort={:.2},{:.2} agent_profit={:.6}",
            from_table.e1,
            from_table.e2,
            table.agent_profit(i, j)
        );
        println!(
            "closed_form effort={:.2},{:.2} agent_profit={:.6}",
            closed.e1,
            closed.e2,
            agent_profit(p1, p2, closed, params)
        );
    }
    Ok(())
}
