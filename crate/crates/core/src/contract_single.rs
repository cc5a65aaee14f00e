//! Single principal-agent environment and the limited-liability debt
//! contract reference model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One principal funding one agent. The principal picks a tax rate on the
/// net payoff `(T - I) e`; the agent then picks effort at cost `c e^2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleContractParams {
    pub investment: f64,
    pub top_payoff: f64,
    pub effort_cost: f64,
    pub tax_levels: usize,
}

impl Default for SingleContractParams {
    fn default() -> Self {
        Self {
            investment: 1.0,
            top_payoff: 2.0,
            effort_cost: 2.0,
            tax_levels: 101,
        }
    }
}

impl SingleContractParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.investment > 0.0 && self.investment.is_finite()) {
            return Err(Error::config("I1", format!("must be positive, got {}", self.investment)));
        }
        if !(self.top_payoff > self.investment && self.top_payoff.is_finite()) {
            return Err(Error::config(
                "T1",
                format!("must exceed I1={}, got {}", self.investment, self.top_payoff),
            ));
        }
        if !(self.effort_cost > 0.0 && self.effort_cost.is_finite()) {
            return Err(Error::config("c", format!("must be positive, got {}", self.effort_cost)));
        }
        if self.tax_levels < 2 {
            return Err(Error::config("d_p", format!("needs at least 2 levels, got {}", self.tax_levels)));
        }
        Ok(())
    }

    pub fn margin(&self) -> f64 {
        self.top_payoff - self.investment
    }

    pub fn tax(&self, index: usize) -> f64 {
        grid_point(index, self.tax_levels)
    }
}

/// `index / (levels - 1)`.
pub fn grid_point(index: usize, levels: usize) -> f64 {
    index as f64 / (levels - 1) as f64
}

fn check_tax(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("tax rate {p} outside [0,1]")));
    }
    Ok(())
}

/// Maximizer of `(T - I) e (1 - p) - c e^2 / 2` over `e` in `[0,1]`.
pub fn agent_best_effort(p: f64, params: &SingleContractParams) -> Result<f64> {
    check_tax(p)?;
    Ok((params.margin() * (1.0 - p) / params.effort_cost).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub effort: f64,
    /// Net of the returned investment.
    pub principal: f64,
    pub agent: f64,
}

pub fn single_step_profits(p: f64, params: &SingleContractParams) -> Result<StepOutcome> {
    let effort = agent_best_effort(p, params)?;
    let gross = params.margin() * effort;
    Ok(StepOutcome {
        effort,
        principal: gross * p,
        agent: gross * (1.0 - p) - 0.5 * params.effort_cost * effort * effort,
    })
}

/// Two-outcome project: payoff `high` with probability `e`, `low` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnesParams {
    pub high_payoff: f64,
    pub low_payoff: f64,
    pub investment: f64,
    pub effort_cost: f64,
}

impl InnesParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.high_payoff > self.low_payoff) {
            return Err(Error::config("xh", "high payoff must exceed low payoff"));
        }
        if !(self.effort_cost > 0.0) {
            return Err(Error::config("c", "effort cost must be positive"));
        }
        if !(self.investment > 0.0) {
            return Err(Error::config("i", "investment must be positive"));
        }
        Ok(())
    }
}

/// Repayments to the principal in the low and high payoff states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DebtContract {
    pub low: f64,
    pub high: f64,
}

/// Effort solving the agent's first-order condition, clamped to `[0,1]`.
pub fn innes_agent_effort(contract: DebtContract, params: &InnesParams) -> Result<f64> {
    if contract.low > params.low_payoff || contract.high > params.high_payoff {
        return Err(Error::InvalidArgument(format!(
            "repayment ({}, {}) exceeds payoff ({}, {})",
            contract.low, contract.high, params.low_payoff, params.high_payoff
        )));
    }
    let spread = (params.high_payoff - contract.high) - (params.low_payoff - contract.low);
    Ok((spread / params.effort_cost).clamp(0.0, 1.0))
}

/// Agent's expected residual less effort cost.
pub fn innes_agent_value(contract: DebtContract, effort: f64, params: &InnesParams) -> f64 {
    effort * (params.high_payoff - contract.high)
        + (1.0 - effort) * (params.low_payoff - contract.low)
        - 0.5 * params.effort_cost * effort * effort
}

/// Expected repayment minus the investment; zero at exact break-even.
///
/// Written as `D_L + e (D_H - D_L) - I` so that a flat contract paying
/// exactly `I` gives an exact zero for every effort.
pub fn innes_break_even_residual(contract: DebtContract, effort: f64, investment: f64) -> f64 {
    contract.low + effort * (contract.high - contract.low) - investment
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnesOptimum {
    pub contract: DebtContract,
    pub effort: f64,
    /// Agent value at the returned grid contract.
    pub agent_value: f64,
    pub residual: f64,
}

/// Grid points `0, step, 2 step, ..., upper`, always ending exactly at `upper`.
fn lattice(upper: f64, step: f64) -> Vec<f64> {
    let n = (upper / step - 1e-9).ceil().max(0.0) as usize;
    let mut points: Vec<f64> = (0..n).map(|k| k as f64 * step).collect();
    points.push(upper);
    points
}

/// Brute-force search for the agent-optimal break-even debt contract.
///
/// Each low-state repayment row is scanned for its grid solutions of the
/// break-even equation: local minima of `|residual|` along the high-state
/// repayment that lie within `tol`. Candidates are ranked by the agent's
/// value with the residual credited back, i.e. the value the agent would get
/// if the principal were paid exactly `I`. Without the credit the ranking
/// rewards contracts that shortchange the principal by up to `tol`. Ties
/// (within 1e-9) go to the larger low-state repayment, then to the smaller
/// high-state repayment.
pub fn innes_optimal_contract_search(
    params: &InnesParams,
    grid_step: f64,
    tol: f64,
) -> Result<InnesOptimum> {
    params.validate()?;
    if !(grid_step > 0.0) || !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "grid step and tolerance must be positive (step={grid_step}, tol={tol})"
        )));
    }
    if params.low_payoff < 0.0 {
        return Err(Error::InvalidArgument("low payoff must be non-negative".into()));
    }

    let lows = lattice(params.low_payoff, grid_step);
    let highs = lattice(params.high_payoff, grid_step);
    let mut best: Option<(f64, InnesOptimum)> = None;
    let mut residuals = vec![0.0; highs.len()];
    let mut efforts = vec![0.0; highs.len()];

    for &low in &lows {
        for (k, &high) in highs.iter().enumerate() {
            let contract = DebtContract { low, high };
            let e = innes_agent_effort(contract, params)?;
            efforts[k] = e;
            residuals[k] = innes_break_even_residual(contract, e, params.investment);
        }
        for k in 0..highs.len() {
            let r = residuals[k].abs();
            if r > tol {
                continue;
            }
            let left = k.checked_sub(1).map_or(f64::INFINITY, |j| residuals[j].abs());
            let right = residuals.get(k + 1).map_or(f64::INFINITY, |v| v.abs());
            if r > left || r > right {
                continue;
            }
            let contract = DebtContract { low, high: highs[k] };
            let agent_value = innes_agent_value(contract, efforts[k], params);
            let score = agent_value + residuals[k];
            let candidate = InnesOptimum {
                contract,
                effort: efforts[k],
                agent_value,
                residual: residuals[k],
            };
            let better = match &best {
                None => true,
                Some((best_score, incumbent)) => {
                    if score > best_score + 1e-9 {
                        true
                    } else if score >= best_score - 1e-9 {
                        low > incumbent.contract.low
                            || (low == incumbent.contract.low && highs[k] < incumbent.contract.high)
                    } else {
                        false
                    }
                }
            };
            if better {
                best = Some((score, candidate));
            }
        }
    }

    best.map(|(_, opt)| opt).ok_or_else(|| {
        Error::NotFound(format!(
            "no contract on a {grid_step} grid breaks even within {tol} for I={}",
            params.investment
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn baseline() -> SingleContractParams {
        SingleContractParams::default()
    }

    /// Brute-force agent optimum on a 1e-4 effort lattice.
    fn grid_argmax_effort(p: f64, params: &SingleContractParams) -> (f64, f64) {
        let mut best = (0.0, f64::NEG_INFINITY);
        for k in 0..=10_000 {
            let e = k as f64 / 10_000.0;
            let v = params.margin() * e * (1.0 - p) - 0.5 * params.effort_cost * e * e;
            if v > best.1 {
                best = (e, v);
            }
        }
        best
    }

    fn innes_grid_argmax(contract: DebtContract, params: &InnesParams) -> f64 {
        let mut best = (0.0, f64::NEG_INFINITY);
        for k in 0..=10_000 {
            let e = k as f64 / 10_000.0;
            let v = innes_agent_value(contract, e, params);
            if v > best.1 {
                best = (e, v);
            }
        }
        best.0
    }

    #[test]
    fn best_effort_examples() {
        let p = baseline();
        // oracle values frozen from grid_argmax_effort
        assert_eq!(grid_argmax_effort(0.5, &p).0, 0.25);
        assert_eq!(grid_argmax_effort(0.0, &p).0, 0.5);
        assert!((agent_best_effort(0.5, &p).unwrap() - 0.25).abs() < 1e-12);
        assert!((agent_best_effort(0.0, &p).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(agent_best_effort(1.0, &p).unwrap(), 0.0);
        assert!(agent_best_effort(1.2, &p).is_err());
        assert!(agent_best_effort(-0.1, &p).is_err());
    }

    #[test]
    fn step_profit_examples() {
        let p = baseline();
        let s = single_step_profits(0.5, &p).unwrap();
        assert!((s.principal - 0.125).abs() < 1e-12);
        assert!((s.agent - 0.0625).abs() < 1e-12);
        let s = single_step_profits(1.0, &p).unwrap();
        assert_eq!((s.principal, s.agent), (0.0, 0.0));
        let s = single_step_profits(0.0, &p).unwrap();
        assert_eq!(s.principal, 0.0);
        assert!((s.agent - 0.25).abs() < 1e-12);
        // cross-check against the brute-force oracle
        let (_, v) = grid_argmax_effort(0.0, &p);
        assert!((v - 0.25).abs() < 1e-9);
    }

    #[test]
    fn principal_profit_peaks_at_half_on_grid() {
        let p = baseline();
        let best = (0..p.tax_levels)
            .max_by(|&a, &b| {
                let pa = single_step_profits(p.tax(a), &p).unwrap().principal;
                let pb = single_step_profits(p.tax(b), &p).unwrap().principal;
                pa.partial_cmp(&pb).unwrap()
            })
            .unwrap();
        assert_eq!(best, 50);
    }

    #[test]
    fn innes_effort_examples() {
        let ip = InnesParams { high_payoff: 2.0, low_payoff: 1.0, investment: 1.0, effort_cost: 2.0 };
        let c = DebtContract { low: 1.0, high: 1.5 };
        assert!((innes_agent_effort(c, &ip).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(innes_grid_argmax(c, &ip), 0.25);
        let c = DebtContract { low: 1.0, high: 1.2 };
        assert!((innes_agent_effort(c, &ip).unwrap() - 0.4).abs() < 1e-12);
        assert_eq!(innes_grid_argmax(c, &ip), 0.4);
        let c = DebtContract { low: 1.0, high: 2.0 };
        assert_eq!(innes_agent_effort(c, &ip).unwrap(), 0.0);
        assert!(innes_agent_effort(DebtContract { low: 1.1, high: 1.0 }, &ip).is_err());
        assert!(innes_agent_effort(DebtContract { low: 1.0, high: 2.5 }, &ip).is_err());
    }

    #[test]
    fn break_even_residual_examples() {
        let c = DebtContract { low: 1.0, high: 1.5 };
        assert_eq!(innes_break_even_residual(c, 0.25, 1.0), 0.125);
        for level in [1.0, 1.3, 0.7] {
            let flat = DebtContract { low: level, high: level };
            for e in [0.0, 0.3, 0.77, 1.0] {
                assert_eq!(innes_break_even_residual(flat, e, level), 0.0);
            }
        }
        let c = DebtContract { low: 1.0, high: 1.2 };
        assert!(innes_break_even_residual(c, 0.4, 1.08).abs() < 1e-12);
    }

    #[test]
    fn optimal_contract_is_debt() {
        let ip = InnesParams { high_payoff: 2.0, low_payoff: 1.0, investment: 1.1, effort_cost: 2.0 };
        let opt = innes_optimal_contract_search(&ip, 0.001, 0.002).unwrap();
        assert_eq!(opt.contract.low, 1.0);
        // smaller root of (2 - x)(x - 1) = 0.2
        let root = (3.0 - 0.2f64.sqrt()) / 2.0;
        assert!((opt.contract.high - root).abs() <= 0.001, "{:?}", opt);
        assert!(opt.contract.high > ip.investment && opt.contract.high < ip.high_payoff);
    }

    #[test]
    fn riskless_funding_gives_flat_contract() {
        let ip = InnesParams { high_payoff: 2.0, low_payoff: 1.0, investment: 1.0, effort_cost: 2.0 };
        let opt = innes_optimal_contract_search(&ip, 0.001, 0.002).unwrap();
        assert_eq!(opt.contract.low, 1.0);
        assert!((opt.contract.high - 1.0).abs() <= 0.001, "{:?}", opt);
    }

    #[test]
    fn infeasible_financing_is_not_found() {
        let ip = InnesParams { high_payoff: 2.0, low_payoff: 1.0, investment: 5.0, effort_cost: 2.0 };
        assert!(matches!(innes_optimal_contract_search(&ip, 0.01, 0.02), Err(Error::NotFound(_))));
        // I = 1.3 needs (2 - x)(x - 1) = 0.6 but the left side never exceeds 0.25
        let ip = InnesParams { investment: 1.3, ..ip };
        assert!(matches!(innes_optimal_contract_search(&ip, 0.001, 0.002), Err(Error::NotFound(_))));
    }

    #[test]
    fn lattice_ends_on_upper() {
        let l = lattice(1.0, 0.3);
        assert_eq!(l.len(), 5);
        assert_eq!(*l.last().unwrap(), 1.0);
        assert_eq!(lattice(1.0, 0.001).len(), 1001);
    }

    #[test]
    fn innes_effort_matches_grid_on_lattice() {
        let ip = InnesParams { high_payoff: 2.0, low_payoff: 1.0, investment: 1.0, effort_cost: 2.0 };
        for i in 0..=100 {
            for j in (0..=200).step_by(7) {
                let c = DebtContract { low: i as f64 / 100.0, high: j as f64 / 100.0 };
                let closed = innes_agent_effort(c, &ip).unwrap();
                assert!((closed - innes_grid_argmax(c, &ip)).abs() <= 1e-4 + 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn effort_non_increasing_in_tax(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let p = baseline();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(agent_best_effort(hi, &p).unwrap() <= agent_best_effort(lo, &p).unwrap());
        }

        #[test]
        fn baseline_closed_forms(i in 0usize..=100) {
            let p = baseline();
            let tax = p.tax(i);
            let s = single_step_profits(tax, &p).unwrap();
            prop_assert!((s.principal - tax * (1.0 - tax) / 2.0).abs() < 1e-12);
            prop_assert!((s.agent - (1.0 - tax).powi(2) / 4.0).abs() < 1e-12);
            prop_assert!(s.agent >= 0.0);
            let (_, oracle) = grid_argmax_effort(tax, &p);
            prop_assert!((s.agent - oracle).abs() < 1e-6);
        }
    }
}
