//! Weighting functions `g(J)` that distinguish SPC algorithms.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightingFn {
    /// `exp(-J / lambda)`.
    Mppi { lambda: f64 },
    /// All mass on the lowest-cost sample.
    PredictiveSampling,
    /// Equal weight on the `num_elites` lowest-cost samples.
    Cem { num_elites: usize },
    /// `max(1 - (r - 1) J / lambda, 0)^(1 / (r - 1))`.
    Tsallis { lambda: f64, r: f64 },
}

impl WeightingFn {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            WeightingFn::Mppi { lambda } => lambda > 0.0 && lambda.is_finite(),
            WeightingFn::PredictiveSampling => true,
            WeightingFn::Cem { num_elites } => num_elites >= 1,
            WeightingFn::Tsallis { lambda, r } => lambda > 0.0 && r > 1.0 && lambda.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid weighting parameters {self:?}")))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WeightingFn::Mppi { .. } => "mppi",
            WeightingFn::PredictiveSampling => "ps",
            WeightingFn::Cem { .. } => "cem",
            WeightingFn::Tsallis { .. } => "tsallis",
        }
    }
}

/// Index of the lowest finite cost; ties go to the lowest index.
pub fn argmin(costs: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &c) in costs.iter().enumerate() {
        if c.is_finite() && best.is_none_or(|b| c < costs[b]) {
            best = Some(i);
        }
    }
    best
}

/// Non-negative, unnormalized weights for a vector of sample costs.
///
/// `+inf` costs always get zero weight. MPPI and Tsallis subtract the
/// minimum cost before evaluating `g`, which cancels after normalization.
pub fn weight(g: &WeightingFn, costs: &[f64]) -> Result<Vec<f64>> {
    g.validate()?;
    if costs.iter().any(|c| c.is_nan()) {
        return Err(Error::NonFinite("sample costs".into()));
    }
    let best = argmin(costs).ok_or(Error::NoValidRollout)?;
    let baseline = costs[best];
    let weights = match *g {
        WeightingFn::Mppi { lambda } => costs
            .iter()
            .map(|&c| {
                if c.is_finite() {
                    (-(c - baseline) / lambda).exp()
                } else {
                    0.0
                }
            })
            .collect(),
        WeightingFn::PredictiveSampling => {
            let mut w = vec![0.0; costs.len()];
            w[best] = 1.0;
            w
        }
        WeightingFn::Cem { num_elites } => {
            let mut order: Vec<usize> = (0..costs.len()).filter(|&i| costs[i].is_finite()).collect();
            // stable sort: equal costs keep index order
            order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]));
            let mut w = vec![0.0; costs.len()];
            for &i in order.iter().take(num_elites) {
                w[i] = 1.0;
            }
            w
        }
        WeightingFn::Tsallis { lambda, r } => costs
            .iter()
            .map(|&c| {
                if c.is_finite() {
                    let base = 1.0 - (r - 1.0) * (c - baseline) / lambda;
                    base.max(0.0).powf(1.0 / (r - 1.0))
                } else {
                    0.0
                }
            })
            .collect(),
    };
    Ok(weights)
}

/// Weights scaled to sum to one.
pub fn normalized(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}
