//! Two principals, one agent.
//!
//! The agent splits effort `e1 + e2 <= 1` between the two projects after
//! seeing both tax rates. Effort actions are enumerated over the triangular
//! lattice `{(i, j) / (d_e - 1) : i + j <= d_e - 1}`, `e1`-major, so action
//! `k` for `e1 = 0` are the first `d_e` indices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contract_single::grid_point;
use crate::error::{Error, Result};

/// How blended rewards are formed from the two principals' profits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum BlendForm {
    /// `r_i = beta (pi_1 + pi_2) + (1 - 2 beta) pi_i` on raw profits.
    #[default]
    #[serde(rename = "algorithm2")]
    RawProfit,
    /// `r_i = (T_i - I_i) [beta (e1 p1 + e2 p2) + (1 - 2 beta) e_i p_i]`.
    /// Identical to `RawProfit` when both projects have unit margin.
    #[serde(rename = "section54")]
    MarginScaled,
}

impl BlendForm {
    pub fn as_str(&self) -> &'static str {
        match self {
            BlendForm::RawProfit => "algorithm2",
            BlendForm::MarginScaled => "section54",
        }
    }
}

impl std::str::FromStr for BlendForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "algorithm2" => Ok(BlendForm::RawProfit),
            "section54" => Ok(BlendForm::MarginScaled),
            other => Err(Error::config(
                "blend_form",
                format!("expected \"algorithm2\" or \"section54\", got {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualContractParams {
    pub investment: [f64; 2],
    pub top_payoff: [f64; 2],
    pub effort_cost: f64,
    pub kappa: f64,
    pub beta: f64,
    pub tax_levels: usize,
    pub effort_levels: usize,
    pub blend: BlendForm,
}

impl Default for DualContractParams {
    fn default() -> Self {
        Self {
            investment: [1.0, 1.0],
            top_payoff: [2.0, 2.0],
            effort_cost: 2.0,
            kappa: 0.0,
            beta: 0.0,
            tax_levels: 101,
            effort_levels: 101,
            blend: BlendForm::RawProfit,
        }
    }
}

impl DualContractParams {
    pub fn validate(&self) -> Result<()> {
        for (i, key) in [(0, "I1"), (1, "I2")] {
            if !(self.investment[i] > 0.0 && self.investment[i].is_finite()) {
                return Err(Error::config(key, format!("must be positive, got {}", self.investment[i])));
            }
        }
        for (i, key) in [(0, "T1"), (1, "T2")] {
            if !(self.top_payoff[i] > self.investment[i] && self.top_payoff[i].is_finite()) {
                return Err(Error::config(
                    key,
                    format!("must exceed the investment {}, got {}", self.investment[i], self.top_payoff[i]),
                ));
            }
        }
        if !(self.effort_cost > 0.0 && self.effort_cost.is_finite()) {
            return Err(Error::config("c", format!("must be positive, got {}", self.effort_cost)));
        }
        if !(0.0..1.0).contains(&self.kappa) {
            return Err(Error::config("kappa", format!("must lie in [0,1), got {}", self.kappa)));
        }
        if !(0.0..=0.5).contains(&self.beta) {
            return Err(Error::config("beta", format!("must lie in [0,0.5], got {}", self.beta)));
        }
        if self.tax_levels < 2 {
            return Err(Error::config("d_p", format!("needs at least 2 levels, got {}", self.tax_levels)));
        }
        if self.effort_levels < 2 {
            return Err(Error::config("d_e", format!("needs at least 2 levels, got {}", self.effort_levels)));
        }
        Ok(())
    }

    pub fn margin(&self, project: usize) -> f64 {
        self.top_payoff[project] - self.investment[project]
    }

    pub fn tax(&self, index: usize) -> f64 {
        grid_point(index, self.tax_levels)
    }

    /// Net-of-investment rewards handed to the two learners.
    pub fn rewards(&self, p1: f64, p2: f64, e: EffortPair) -> [f64; 2] {
        match self.blend {
            BlendForm::RawProfit => {
                let (pi1, pi2) = principal_profits(p1, p2, e, self);
                let (r1, r2) = blended_rewards(pi1, pi2, self.beta);
                [r1, r2]
            }
            BlendForm::MarginScaled => {
                let own = [e.e1 * p1, e.e2 * p2];
                let joint = own[0] + own[1];
                let b = self.beta;
                [0, 1].map(|i| self.margin(i) * (b * joint + (1.0 - 2.0 * b) * own[i]))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EffortPair {
    pub e1: f64,
    pub e2: f64,
}

impl EffortPair {
    pub fn new(e1: f64, e2: f64) -> Self {
        Self { e1, e2 }
    }

    pub fn total(&self) -> f64 {
        self.e1 + self.e2
    }

    pub fn is_feasible(&self) -> bool {
        self.e1 >= 0.0 && self.e2 >= 0.0 && self.total() <= 1.0 + 1e-9
    }
}

/// `c (e1+e2)^2 / 2 * (1 - kappa + 2 kappa e2 / (e1+e2))`, zero at no effort.
pub fn agent_cost(e: EffortPair, c: f64, kappa: f64) -> f64 {
    let total = e.total();
    if total == 0.0 {
        return 0.0;
    }
    0.5 * c * total * total * (1.0 - kappa + 2.0 * kappa * e.e2 / total)
}

pub fn agent_profit(p1: f64, p2: f64, e: EffortPair, params: &DualContractParams) -> f64 {
    params.margin(0) * e.e1 * (1.0 - p1) + params.margin(1) * e.e2 * (1.0 - p2)
        - agent_cost(e, params.effort_cost, params.kappa)
}

/// Net profits `((T1-I1) e1 p1, (T2-I2) e2 p2)`.
pub fn principal_profits(p1: f64, p2: f64, e: EffortPair, params: &DualContractParams) -> (f64, f64) {
    (params.margin(0) * e.e1 * p1, params.margin(1) * e.e2 * p2)
}

pub fn blended_rewards(pi1: f64, pi2: f64, beta: f64) -> (f64, f64) {
    let joint = beta * (pi1 + pi2);
    (joint + (1.0 - 2.0 * beta) * pi1, joint + (1.0 - 2.0 * beta) * pi2)
}

pub fn action_count(effort_levels: usize) -> usize {
    effort_levels * (effort_levels + 1) / 2
}

pub fn decode_action(k: usize, effort_levels: usize) -> Result<EffortPair> {
    if effort_levels < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 effort levels, got {effort_levels}")));
    }
    if k >= action_count(effort_levels) {
        return Err(Error::InvalidArgument(format!(
            "action {k} out of range for {} actions",
            action_count(effort_levels)
        )));
    }
    let mut offset = k;
    let mut i = 0;
    loop {
        let row = effort_levels - i;
        if offset < row {
            return Ok(EffortPair::new(
                grid_point(i, effort_levels),
                grid_point(offset, effort_levels),
            ));
        }
        offset -= row;
        i += 1;
    }
}

/// Inverse of [`decode_action`] on lattice indices.
pub fn encode_action(i: usize, j: usize, effort_levels: usize) -> usize {
    // rows 0..i hold d_e + (d_e - 1) + ... + (d_e - i + 1) actions
    i * effort_levels - i * (i.saturating_sub(1)) / 2 + j
}

/// Profit gap below which two agent actions count as tied. Splitting a fixed
/// total effort between equally taxed projects is an exact tie in real arithmetic but
/// rounds differently in floating point; the margin keeps the lowest index.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Agent's best response for every `(p1, p2)` tax cell.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentDecisionTable {
    source: DualContractParams,
    tax_levels: usize,
    effort_levels: usize,
    actions: Vec<u32>,
    efforts: Vec<EffortPair>,
    profits: Vec<f64>,
}

impl AgentDecisionTable {
    /// Exhaustive scan of every enumerated action for every cell; the lowest
    /// action index wins ties (up to [`TIE_TOLERANCE`]). Rows are built in
    /// parallel.
    pub fn build(params: &DualContractParams) -> Result<Self> {
        params.validate()?;
        let d_p = params.tax_levels;
        let d_e = params.effort_levels;
        let enumerated: Vec<EffortPair> = (0..d_e)
            .flat_map(|i| (0..d_e - i).map(move |j| EffortPair::new(grid_point(i, d_e), grid_point(j, d_e))))
            .collect();
        debug_assert_eq!(enumerated.len(), action_count(d_e));

        let cells: Vec<(u32, f64)> = (0..d_p)
            .into_par_iter()
            .flat_map_iter(|i| {
                let p1 = params.tax(i);
                let enumerated = &enumerated;
                (0..d_p).map(move |j| {
                    let p2 = params.tax(j);
                    let mut best = (0u32, f64::NEG_INFINITY);
                    for (k, &e) in enumerated.iter().enumerate() {
                        let v = agent_profit(p1, p2, e, params);
                        if v > best.1 + TIE_TOLERANCE {
                            best = (k as u32, v);
                        }
                    }
                    best
                })
            })
            .collect();

        Ok(Self {
            source: *params,
            tax_levels: d_p,
            effort_levels: d_e,
            efforts: cells.iter().map(|&(k, _)| enumerated[k as usize]).collect(),
            actions: cells.iter().map(|&(k, _)| k).collect(),
            profits: cells.iter().map(|&(_, v)| v).collect(),
        })
    }

    pub fn tax_levels(&self) -> usize {
        self.tax_levels
    }

    pub fn effort_levels(&self) -> usize {
        self.effort_levels
    }

    pub fn action(&self, i: usize, j: usize) -> usize {
        self.actions[i * self.tax_levels + j] as usize
    }

    #[inline]
    pub fn effort(&self, i: usize, j: usize) -> EffortPair {
        self.efforts[i * self.tax_levels + j]
    }

    pub fn agent_profit(&self, i: usize, j: usize) -> f64 {
        self.profits[i * self.tax_levels + j]
    }

    /// True when the table was built for the same agent problem as `params`;
    /// beta and the blend form do not affect the agent.
    pub fn matches(&self, params: &DualContractParams) -> bool {
        let a = &self.source;
        a.investment == params.investment
            && a.top_payoff == params.top_payoff
            && a.effort_cost == params.effort_cost
            && a.kappa == params.kappa
            && a.tax_levels == params.tax_levels
            && a.effort_levels == params.effort_levels
    }
}

pub fn build_agent_table(params: &DualContractParams) -> Result<AgentDecisionTable> {
    AgentDecisionTable::build(params)
}

/// Continuous best response. For a fixed total effort the cost is linear in
/// `e2`, so the optimum puts all effort in one project; the two pure
/// candidates are compared and exact ties go to project 2.
pub fn agent_best_effort_closed_form(p1: f64, p2: f64, params: &DualContractParams) -> EffortPair {
    let c = params.effort_cost;
    let e1 = (params.margin(0) * (1.0 - p1) / (c * (1.0 - params.kappa))).clamp(0.0, 1.0);
    let e2 = (params.margin(1) * (1.0 - p2) / (c * (1.0 + params.kappa))).clamp(0.0, 1.0);
    let only1 = EffortPair::new(e1, 0.0);
    let only2 = EffortPair::new(0.0, e2);
    if agent_profit(p1, p2, only1, params) > agent_profit(p1, p2, only2, params) {
        only1
    } else {
        only2
    }
}

/// Closed-form best response snapped to the nearest effort lattice point.
pub fn quantized_closed_form(p1: f64, p2: f64, params: &DualContractParams) -> EffortPair {
    let e = agent_best_effort_closed_form(p1, p2, params);
    let steps = (params.effort_levels - 1) as f64;
    let snap = |x: f64| (x * steps).round() / steps;
    EffortPair::new(snap(e.e1), snap(e.e2))
}
