//! Aggregation of per-domain rollout costs into one cost per sample.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RiskAggregator {
    Average,
    WorstCase,
    /// Expected cost in the worst `1 - beta` tail.
    Cvar { beta: f64 },
}

impl RiskAggregator {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RiskAggregator::Cvar { beta } if !(0.0..1.0).contains(&beta) => Err(
                Error::InvalidArgument(format!("CVaR beta must lie in [0, 1), got {beta}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RiskAggregator::Average => "average",
            RiskAggregator::WorstCase => "worst_case",
            RiskAggregator::Cvar { .. } => "cvar",
        }
    }
}

fn mean(costs: &[f64]) -> f64 {
    costs.iter().sum::<f64>() / costs.len() as f64
}

/// Exact CVaR of the empirical distribution that puts mass `1/n` on each
/// cost: the minimizer of `z + E[max(J - z, 0)] / (1 - beta)` sits at the
/// `beta`-quantile, so the value is the mean of the top `(1 - beta) n`
/// costs with the boundary cost counted fractionally.
fn cvar(costs: &[f64], beta: f64) -> f64 {
    if beta == 0.0 {
        return mean(costs);
    }
    let n = costs.len();
    let mut sorted = costs.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut tail = (1.0 - beta) * n as f64;
    if (tail - tail.round()).abs() < 1e-12 {
        tail = tail.round();
    }
    let whole = (tail.floor() as usize).min(n);
    let frac = tail - whole as f64;
    let mut total: f64 = sorted[..whole].iter().sum();
    if frac > 0.0 && whole < n {
        total += frac * sorted[whole];
    }
    total / tail
}

/// Aggregates one sample's costs over all domains.
pub fn aggregate(agg: &RiskAggregator, domain_costs: &[f64]) -> Result<f64> {
    agg.validate()?;
    if domain_costs.is_empty() {
        return Err(Error::InvalidArgument("need at least one domain cost".into()));
    }
    Ok(match *agg {
        RiskAggregator::Average => mean(domain_costs),
        RiskAggregator::WorstCase => domain_costs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        RiskAggregator::Cvar { beta } => cvar(domain_costs, beta),
    })
}
