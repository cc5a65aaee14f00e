//! On-disk formats: JSON run configuration, JSON-lines trajectories and CSV
//! tables. See `docs/FORMATS.md` for the exact layouts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::contract_dual::{BlendForm, DualContractParams};
use crate::contract_single::{grid_point, SingleContractParams};
use crate::contract_dual::AgentDecisionTable;
use crate::error::{Error, Result};
use crate::experiments::{defaults, Environment, RunConfig, RunResult, SweepSummary};
use crate::qcore::{ExplorationSchedule, LearningParams, QTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Single,
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplorationDoc {
    Fixed(f64),
    ExpDecay(f64),
}

impl From<ExplorationDoc> for ExplorationSchedule {
    fn from(doc: ExplorationDoc) -> Self {
        match doc {
            ExplorationDoc::Fixed(eps) => ExplorationSchedule::Fixed(eps),
            ExplorationDoc::ExpDecay(k) => ExplorationSchedule::ExpDecay(k),
        }
    }
}

impl From<ExplorationSchedule> for ExplorationDoc {
    fn from(s: ExplorationSchedule) -> Self {
        match s {
            ExplorationSchedule::Fixed(eps) => ExplorationDoc::Fixed(eps),
            ExplorationSchedule::ExpDecay(k) => ExplorationDoc::ExpDecay(k),
        }
    }
}

/// Every key is optional; missing keys take the baseline defaults when the
/// document is resolved with [`ConfigDocument::to_run_config`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfigDocument {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub env: Option<EnvKind>,
    #[serde(rename = "I1", skip_serializing_if = "Option::is_none")]
    pub i1: Option<f64>,
    #[serde(rename = "I2", skip_serializing_if = "Option::is_none")]
    pub i2: Option<f64>,
    #[serde(rename = "T1", skip_serializing_if = "Option::is_none")]
    pub t1: Option<f64>,
    #[serde(rename = "T2", skip_serializing_if = "Option::is_none")]
    pub t2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_p: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_e: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exploration: Option<ExplorationDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence_window: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blend_form: Option<BlendForm>,
}

const KEYS: [&str; 18] = [
    "env",
    "I1",
    "I2",
    "T1",
    "T2",
    "c",
    "kappa",
    "beta",
    "d_p",
    "d_e",
    "alpha",
    "delta",
    "exploration",
    "t_max",
    "snapshot_every",
    "seed",
    "convergence_window",
    "blend_form",
];

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let Value::Object(map) = &value else {
            return Err(Error::Parse("configuration must be a JSON object".into()));
        };
        if let Some(key) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(Error::config(key, "unknown key"));
        }
        for (key, v) in map {
            let single = serde_json::json!({ key: v });
            serde_json::from_value::<ConfigDocument>(single)
                .map_err(|e| Error::config(key, format!("wrong type: {e}")))?;
        }
        serde_json::from_value(value).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Field-wise overlay: values present in `top` win.
    pub fn overlay(&self, top: &ConfigDocument) -> ConfigDocument {
        ConfigDocument {
            env: top.env.or(self.env),
            i1: top.i1.or(self.i1),
            i2: top.i2.or(self.i2),
            t1: top.t1.or(self.t1),
            t2: top.t2.or(self.t2),
            c: top.c.or(self.c),
            kappa: top.kappa.or(self.kappa),
            beta: top.beta.or(self.beta),
            d_p: top.d_p.or(self.d_p),
            d_e: top.d_e.or(self.d_e),
            alpha: top.alpha.or(self.alpha),
            delta: top.delta.or(self.delta),
            exploration: top.exploration.or(self.exploration),
            t_max: top.t_max.or(self.t_max),
            snapshot_every: top.snapshot_every.or(self.snapshot_every),
            seed: top.seed.or(self.seed),
            convergence_window: top.convergence_window.or(self.convergence_window),
            blend_form: top.blend_form.or(self.blend_form),
        }
    }

    /// Fills defaults and validates. The environment defaults to `dual`.
    ///
    /// Unset `snapshot_every` and `convergence_window` are capped at `t_max`
    /// so that short runs do not need to set them explicitly.
    pub fn to_run_config(&self) -> Result<RunConfig> {
        let env_kind = self.env.unwrap_or(EnvKind::Dual);
        let dual = DualContractParams {
            investment: [
                self.i1.unwrap_or(defaults::INVESTMENT),
                self.i2.unwrap_or(defaults::INVESTMENT),
            ],
            top_payoff: [
                self.t1.unwrap_or(defaults::TOP_PAYOFF),
                self.t2.unwrap_or(defaults::TOP_PAYOFF),
            ],
            effort_cost: self.c.unwrap_or(defaults::EFFORT_COST),
            kappa: self.kappa.unwrap_or(defaults::KAPPA),
            beta: self.beta.unwrap_or(defaults::BETA),
            tax_levels: self.d_p.unwrap_or(defaults::TAX_LEVELS),
            effort_levels: self.d_e.unwrap_or(defaults::EFFORT_LEVELS),
            blend: self.blend_form.unwrap_or_default(),
        };
        // keys that do not enter the chosen environment are still range-checked
        dual.validate()?;

        let (env, exploration, t_max) = match env_kind {
            EnvKind::Single => (
                Environment::Single(SingleContractParams {
                    investment: dual.investment[0],
                    top_payoff: dual.top_payoff[0],
                    effort_cost: dual.effort_cost,
                    tax_levels: dual.tax_levels,
                }),
                ExplorationSchedule::Fixed(defaults::EPSILON),
                defaults::SINGLE_T_MAX,
            ),
            EnvKind::Dual => (
                Environment::Dual(dual),
                ExplorationSchedule::ExpDecay(defaults::DECAY_K),
                defaults::DUAL_T_MAX,
            ),
        };
        let t_max = self.t_max.unwrap_or(t_max);
        let config = RunConfig {
            env,
            learning: LearningParams {
                alpha: self.alpha.unwrap_or(defaults::ALPHA),
                delta: self.delta.unwrap_or(defaults::DELTA),
            },
            exploration: self.exploration.map(Into::into).unwrap_or(exploration),
            t_max,
            snapshot_every: self
                .snapshot_every
                .unwrap_or(defaults::SNAPSHOT_EVERY.min(t_max.max(1))),
            seed: self.seed.unwrap_or(defaults::SEED),
            convergence_window: self
                .convergence_window
                .unwrap_or(defaults::CONVERGENCE_WINDOW.min(t_max.max(1))),
        };
        config.validate()?;
        Ok(config)
    }

    /// Fully populated document describing `config`.
    pub fn from_run_config(config: &RunConfig) -> Self {
        let fallback = DualContractParams::default();
        let (env, dual) = match config.env {
            Environment::Single(p) => (
                EnvKind::Single,
                DualContractParams {
                    investment: [p.investment, fallback.investment[1]],
                    top_payoff: [p.top_payoff, fallback.top_payoff[1]],
                    effort_cost: p.effort_cost,
                    tax_levels: p.tax_levels,
                    ..fallback
                },
            ),
            Environment::Dual(p) => (EnvKind::Dual, p),
        };
        ConfigDocument {
            env: Some(env),
            i1: Some(dual.investment[0]),
            i2: Some(dual.investment[1]),
            t1: Some(dual.top_payoff[0]),
            t2: Some(dual.top_payoff[1]),
            c: Some(dual.effort_cost),
            kappa: Some(dual.kappa),
            beta: Some(dual.beta),
            d_p: Some(dual.tax_levels),
            d_e: Some(dual.effort_levels),
            alpha: Some(config.learning.alpha),
            delta: Some(config.learning.delta),
            exploration: Some(config.exploration.into()),
            t_max: Some(config.t_max),
            snapshot_every: Some(config.snapshot_every),
            seed: Some(config.seed),
            convergence_window: Some(config.convergence_window),
            blend_form: Some(dual.blend),
        }
    }
}

pub fn read_config_document(path: impl AsRef<Path>) -> Result<ConfigDocument> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ConfigDocument::parse(&text)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    read_config_document(path)?.to_run_config()
}

pub fn write_config(config: &RunConfig, path: impl AsRef<Path>) -> Result<()> {
    let doc = ConfigDocument::from_run_config(config);
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Parse(e.to_string()))?;
    text.push('\n');
    write_file(path.as_ref(), text)
}

/// One snapshot as written to a trajectory file. `p2`, `e2` and `pi2` are
/// absent for single-principal runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryRecord {
    pub t: u64,
    pub epsilon: f64,
    pub p1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p2: Option<f64>,
    pub e1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e2: Option<f64>,
    pub pi1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi2: Option<f64>,
    pub agent_profit: f64,
    pub effective_tax: f64,
    #[serde(default, rename = "final", skip_serializing_if = "std::ops::Not::not")]
    pub is_final: bool,
}

pub fn trajectory_records(result: &RunResult) -> Vec<TrajectoryRecord> {
    let dual = result.config.env.learners() == 2;
    let n = result.snapshots.len();
    result
        .snapshots
        .iter()
        .enumerate()
        .map(|(idx, s)| TrajectoryRecord {
            t: s.t,
            epsilon: s.epsilon,
            p1: s.taxes[0],
            p2: dual.then(|| s.taxes[1]),
            e1: s.effort.e1,
            e2: dual.then_some(s.effort.e2),
            pi1: s.greedy_profits[0],
            pi2: dual.then(|| s.greedy_profits[1]),
            agent_profit: s.agent_profit,
            effective_tax: s.effective_tax,
            is_final: idx + 1 == n,
        })
        .collect()
}

pub fn write_trajectory(result: &RunResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for rec in trajectory_records(result) {
        let fields = [
            ("epsilon", Some(rec.epsilon)),
            ("p1", Some(rec.p1)),
            ("p2", rec.p2),
            ("e1", Some(rec.e1)),
            ("e2", rec.e2),
            ("pi1", Some(rec.pi1)),
            ("pi2", rec.pi2),
            ("agent_profit", Some(rec.agent_profit)),
            ("effective_tax", Some(rec.effective_tax)),
        ];
        for (name, v) in fields {
            ensure_finite(path, name, v.unwrap_or(0.0))?;
        }
        out.push_str(&serde_json::to_string(&rec).map_err(|e| Error::Parse(e.to_string()))?);
        out.push('\n');
    }
    write_file(path, out)
}

pub fn read_trajectory(path: impl AsRef<Path>) -> Result<Vec<TrajectoryRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::Parse(e.to_string())))
        .collect()
}

pub const SWEEP_HEADER: &str = "param,value,mean_eff_tax,median_eff_tax,p10,p90,converged_frac,n_seeds";

pub fn sweep_csv(summary: &SweepSummary) -> Result<String> {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for p in &summary.points {
        for (name, v) in [
            ("value", p.value),
            ("mean_eff_tax", p.mean),
            ("median_eff_tax", p.median),
            ("p10", p.p10),
            ("p90", p.p90),
            ("converged_frac", p.converged_frac),
        ] {
            ensure_finite(Path::new("<sweep>"), name, v)?;
        }
        writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            summary.param.as_str(),
            p.value,
            p.mean,
            p.median,
            p.p10,
            p.p90,
            p.converged_frac,
            p.n_seeds
        )
        .expect("writing to a String cannot fail");
    }
    Ok(out)
}

pub fn write_sweep_csv(summary: &SweepSummary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = sweep_csv(summary).map_err(|e| match e {
        Error::NonFinite { field, .. } => Error::NonFinite { path: path.to_path_buf(), field },
        other => other,
    })?;
    write_file(path, text)
}

/// `action_index,tax_rate,q_value` for a single-state table. Q-values use the
/// shortest representation that parses back to the identical `f64`, in
/// exponent form outside `[1e-6, 1e15)`.
pub fn dump_qtable(q: &QTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if q.n_states() != 1 {
        return Err(Error::InvalidArgument(format!(
            "Q-table dumps cover single-state tables, got {} states",
            q.n_states()
        )));
    }
    let n = q.n_actions();
    let mut out = String::from("action_index,tax_rate,q_value\n");
    for (a, &v) in q.row(0).iter().enumerate() {
        ensure_finite(path, "q_value", v)?;
        let tax = if n > 1 { grid_point(a, n) } else { 0.0 };
        let mag = v.abs();
        if v == 0.0 || (1e-6..1e15).contains(&mag) {
            writeln!(out, "{a},{tax:.6},{v}")
        } else {
            writeln!(out, "{a},{tax:.6},{v:e}")
        }
        .expect("writing to a String cannot fail");
    }
    write_file(path, out)
}

pub const AGENT_TABLE_HEADER: &str = "p1,p2,e1,e2,agent_profit";

pub fn write_agent_table(table: &AgentDecisionTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let d_p = table.tax_levels();
    let mut out = String::with_capacity(48 * d_p * d_p);
    out.push_str(AGENT_TABLE_HEADER);
    out.push('\n');
    for i in 0..d_p {
        for j in 0..d_p {
            let e = table.effort(i, j);
            let v = table.agent_profit(i, j);
            ensure_finite(path, "agent_profit", v)?;
            writeln!(
                out,
                "{:.6},{:.6},{:.6},{:.6},{:.6}",
                grid_point(i, d_p),
                grid_point(j, d_p),
                e.e1,
                e.e2,
                v
            )
            .expect("writing to a String cannot fail");
        }
    }
    write_file(path, out)
}

fn ensure_finite(path: &Path, field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            path: path.to_path_buf(),
            field: field.to_string(),
        })
    }
}

fn write_file(path: &Path, contents: String) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}
