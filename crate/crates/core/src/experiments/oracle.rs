use super::effective_tax_rate;
use crate::contract_dual::{principal_profits, AgentDecisionTable, DualContractParams, EffortPair};
use crate::error::{Error, Result};

/// Tax pair maximizing the principals' joint net profit under the agent's
/// table best response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollusiveOptimum {
    pub p1: f64,
    pub p2: f64,
    pub effort: EffortPair,
    pub joint_profit: f64,
    /// Tax of the project that receives effort at the optimum.
    pub served_tax: f64,
}

pub fn collusive_optimum_oracle(params: &DualContractParams) -> Result<CollusiveOptimum> {
    let table = AgentDecisionTable::build(params)?;
    collusive_optimum_with_table(params, &table)
}

/// Exhaustive scan of all `(p1, p2)` cells; the first cell in row-major
/// order wins ties.
pub fn collusive_optimum_with_table(
    params: &DualContractParams,
    table: &AgentDecisionTable,
) -> Result<CollusiveOptimum> {
    if !table.matches(params) {
        return Err(Error::InvalidArgument("agent table does not match the parameters".into()));
    }
    let d_p = params.tax_levels;
    let mut best: Option<CollusiveOptimum> = None;
    for i in 0..d_p {
        for j in 0..d_p {
            let (p1, p2) = (params.tax(i), params.tax(j));
            let effort = table.effort(i, j);
            let (pi1, pi2) = principal_profits(p1, p2, effort, params);
            let joint = pi1 + pi2;
            if best.map_or(true, |b| joint > b.joint_profit) {
                best = Some(CollusiveOptimum {
                    p1,
                    p2,
                    effort,
                    joint_profit: joint,
                    served_tax: effective_tax_rate(p1, p2, effort),
                });
            }
        }
    }
    Ok(best.expect("tax grid has at least two levels"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_grid_gives_zero() {
        let params = DualContractParams { tax_levels: 2, effort_levels: 3, ..Default::default() };
        let opt = collusive_optimum_oracle(&params).unwrap();
        assert_eq!(opt.joint_profit, 0.0);
    }

    #[test]
    fn small_grid_matches_direct_enumeration() {
        let params = DualContractParams { tax_levels: 5, effort_levels: 5, kappa: 0.2, ..Default::default() };
        let table = AgentDecisionTable::build(&params).unwrap();
        let opt = collusive_optimum_with_table(&params, &table).unwrap();
        let mut best = f64::NEG_INFINITY;
        for i in 0..5 {
            for j in 0..5 {
                let (a, b) = principal_profits(params.tax(i), params.tax(j), table.effort(i, j), &params);
                best = best.max(a + b);
            }
        }
        assert_eq!(opt.joint_profit, best);
    }
}
