use std::sync::atomic::AtomicBool;

use rayon::prelude::*;
use serde::Serialize;

use super::run::run_dual_with_table;
use super::{Environment, RunConfig};
use crate::contract_dual::AgentDecisionTable;
use crate::error::{Error, Result};
use crate::qcore::ExplorationSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepParam {
    Beta,
    Kappa,
    Alpha,
    K,
}

impl SweepParam {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepParam::Beta => "beta",
            SweepParam::Kappa => "kappa",
            SweepParam::Alpha => "alpha",
            SweepParam::K => "k",
        }
    }

    /// Copy of `template` with this parameter set to `value`.
    pub fn apply(&self, template: &RunConfig, value: f64) -> Result<RunConfig> {
        let mut config = *template;
        match (self, &mut config.env) {
            (SweepParam::Beta, Environment::Dual(p)) => p.beta = value,
            (SweepParam::Kappa, Environment::Dual(p)) => p.kappa = value,
            (SweepParam::Beta | SweepParam::Kappa, Environment::Single(_)) => {
                return Err(Error::config("env", "beta and kappa sweeps need the dual environment"));
            }
            (SweepParam::Alpha, _) => config.learning.alpha = value,
            (SweepParam::K, _) => config.exploration = ExplorationSchedule::ExpDecay(value),
        }
        Ok(config)
    }

    /// Whether changing this parameter changes the agent's problem.
    fn reshapes_agent(&self) -> bool {
        matches!(self, SweepParam::Kappa)
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beta" => Ok(SweepParam::Beta),
            "kappa" => Ok(SweepParam::Kappa),
            "alpha" => Ok(SweepParam::Alpha),
            "k" => Ok(SweepParam::K),
            other => Err(Error::config(
                "param",
                format!("expected one of beta, kappa, alpha, k; got {other:?}"),
            )),
        }
    }
}

/// Outcome of one `(value, seed)` run, kept for inspection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellOutcome {
    pub seed: u64,
    pub final_taxes: Vec<f64>,
    pub effective_tax: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub mean: f64,
    pub median: f64,
    pub p10: f64,
    pub p90: f64,
    pub converged_frac: f64,
    pub n_seeds: usize,
    /// In seed order.
    pub cells: Vec<CellOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub param: SweepParam,
    /// Ascending in `value`.
    pub points: Vec<SweepPoint>,
}

impl SweepSummary {
    pub fn means(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mean).collect()
    }
}

/// Linear-interpolation percentile (`q` in `[0,1]`) of an ascending slice.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn sweep(
    template: &RunConfig,
    param: SweepParam,
    grid: &[f64],
    seeds: &[u64],
    parallelism: usize,
) -> Result<SweepSummary> {
    sweep_with_cancel(template, param, grid, seeds, parallelism, None)
}

/// Runs every `(value, seed)` cell of the grid as an independent dual run on
/// a pool of `parallelism` threads. Each cell is deterministic, so the
/// summary does not depend on scheduling.
pub fn sweep_with_cancel(
    template: &RunConfig,
    param: SweepParam,
    grid: &[f64],
    seeds: &[u64],
    parallelism: usize,
    cancel: Option<&AtomicBool>,
) -> Result<SweepSummary> {
    if grid.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidArgument("sweep needs a nonempty grid and seed list".into()));
    }
    if parallelism == 0 {
        return Err(Error::config("jobs", "parallelism must be at least 1"));
    }
    if template.dual_params().is_none() {
        return Err(Error::config("env", "sweeps run the dual environment"));
    }

    let mut values = grid.to_vec();
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::config(param.as_str(), format!("non-finite grid value {bad}")));
    }
    values.sort_by(f64::total_cmp);

    // validate everything before spending any compute
    let mut configs = Vec::with_capacity(values.len());
    for &value in &values {
        let cell_err = |seed: u64, e: Error| Error::SweepCell {
            param: param.as_str().into(),
            value,
            seed,
            source: Box::new(e),
        };
        let config = param.apply(template, value).map_err(|e| cell_err(seeds[0], e))?;
        for &seed in seeds {
            config.with_seed(seed).validate().map_err(|e| cell_err(seed, e))?;
        }
        configs.push(config);
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;

    pool.install(|| {
        let tables: Vec<AgentDecisionTable> = if param.reshapes_agent() {
            configs
                .par_iter()
                .map(|c| AgentDecisionTable::build(c.dual_params().expect("checked above")))
                .collect::<Result<_>>()?
        } else {
            vec![AgentDecisionTable::build(configs[0].dual_params().expect("checked above"))?]
        };

        let cells: Vec<(usize, u64)> = (0..configs.len())
            .flat_map(|g| seeds.iter().map(move |&s| (g, s)))
            .collect();
        let outcomes: Vec<CellOutcome> = cells
            .par_iter()
            .map(|&(g, seed)| {
                let table = &tables[if param.reshapes_agent() { g } else { 0 }];
                let result = run_dual_with_table(&configs[g].with_seed(seed), table, cancel)
                    .map_err(|e| Error::SweepCell {
                        param: param.as_str().into(),
                        value: values[g],
                        seed,
                        source: Box::new(e),
                    })?;
                Ok(CellOutcome {
                    seed,
                    final_taxes: result.final_taxes,
                    effective_tax: result.effective_tax_final,
                    converged: result.converged,
                })
            })
            .collect::<Result<_>>()?;

        let points = values
            .iter()
            .zip(outcomes.chunks(seeds.len()))
            .map(|(&value, cells)| aggregate(value, cells.to_vec()))
            .collect();
        Ok(SweepSummary { param, points })
    })
}

fn aggregate(value: f64, cells: Vec<CellOutcome>) -> SweepPoint {
    let mut taxes: Vec<f64> = cells.iter().map(|c| c.effective_tax).collect();
    taxes.sort_by(f64::total_cmp);
    let n = taxes.len();
    SweepPoint {
        value,
        mean: taxes.iter().sum::<f64>() / n as f64,
        median: percentile(&taxes, 0.5),
        p10: percentile(&taxes, 0.1),
        p90: percentile(&taxes, 0.9),
        converged_frac: cells.iter().filter(|c| c.converged).count() as f64 / n as f64,
        n_seeds: n,
        cells,
    }
}
