//! Sampling-based predictive control.
//!
//! One SPC step draws Gaussian perturbations of the current mean plan
//! (optionally joined by externally supplied samples, e.g. from a policy),
//! rolls every candidate out in every domain, aggregates the domain costs,
//! weights the candidates and moves the mean by the weighted average
//! displacement.

mod action;
mod risk;
mod score;
mod weighting;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::envs::{DomainParams, Env, EnvState};
use crate::{par, Error, Result};

pub use action::ActionSequence;
pub use risk::{aggregate, RiskAggregator};
pub use score::{estimate_score, weighted_score};
pub use weighting::{argmin, normalized, weight, WeightingFn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleSource {
    Gaussian,
    Policy,
}

/// `n` i.i.d. draws from `N(prev, sigma^2 I)` in knot space, clamped to `[-1, 1]`.
pub fn sample_proposal<R: Rng + ?Sized>(
    prev: &ActionSequence,
    sigma: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<ActionSequence>> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("proposal sigma must be positive, got {sigma}")));
    }
    Ok((0..n)
        .map(|_| {
            let knots = prev
                .knots()
                .iter()
                .map(|&m| {
                    let z: f64 = StandardNormal.sample(rng);
                    (m + sigma * z).clamp(-1.0, 1.0)
                })
                .collect();
            prev.with_knots(knots).expect("same shape as prev")
        })
        .collect())
}

/// Weighted mean update `prev + sum g_i (U_i - prev) / sum g_i`, clamped.
///
/// Evaluated in the equivalent convex-combination form
/// `sum g_i U_i / sum g_i`, so a one-hot weight returns its sample exactly.
pub fn update_mean(
    prev: &ActionSequence,
    samples: &[ActionSequence],
    weights: &[f64],
) -> Result<ActionSequence> {
    Error::check_len("sample weights", samples.len(), weights.len())?;
    let total = check_total_weight(weights)?;
    let mut num = vec![0.0; prev.len()];
    for (s, &w) in samples.iter().zip(weights) {
        Error::check_len("sample", prev.len(), s.len())?;
        if w == 0.0 {
            continue;
        }
        for (n, &x) in num.iter_mut().zip(s.knots()) {
            *n += w * x;
        }
    }
    let knots = num.into_iter().map(|n| n / total).collect();
    Ok(prev.with_knots(knots)?.clamped())
}

pub(crate) fn check_total_weight(weights: &[f64]) -> Result<f64> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "total weight must be positive and finite, got {total}"
        )));
    }
    Ok(total)
}

/// Everything a single SPC step needs besides the current plan and state.
#[derive(Debug, Clone, Copy)]
pub struct SpcProblem<'a> {
    pub env: &'a Env,
    /// Domains every candidate is rolled out in; at least one.
    pub domains: &'a [DomainParams],
    pub weighting: WeightingFn,
    pub risk: RiskAggregator,
    pub sigma: f64,
    pub num_gaussian: usize,
}

/// Candidates of one SPC step together with their costs.
#[derive(Debug, Clone)]
pub struct RolloutBatch {
    pub sequences: Vec<ActionSequence>,
    pub sources: Vec<SampleSource>,
    /// Row-major `(samples, domains)`; `+inf` marks a diverged rollout.
    pub costs: Vec<f64>,
    pub num_domains: usize,
    pub aggregated: Vec<f64>,
    pub weights: Vec<f64>,
    /// Index of the lowest aggregated cost.
    pub best: usize,
}

impl RolloutBatch {
    pub fn num_samples(&self) -> usize {
        self.sequences.len()
    }

    pub fn num_rollouts(&self) -> usize {
        self.costs.len()
    }

    pub fn domain_costs(&self, sample: usize) -> &[f64] {
        &self.costs[sample * self.num_domains..(sample + 1) * self.num_domains]
    }

    pub fn best_source(&self) -> SampleSource {
        self.sources[self.best]
    }

    pub fn best_cost(&self) -> f64 {
        self.aggregated[self.best]
    }
}

/// Rolls every sequence out in every domain from `state` and aggregates.
pub fn evaluate_candidates(
    problem: &SpcProblem<'_>,
    state: &EnvState,
    sequences: &[ActionSequence],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let nd = problem.domains.len();
    if nd == 0 {
        return Err(Error::InvalidArgument("at least one domain is required".into()));
    }
    let env = problem.env;
    let costs = par::map_range(sequences.len() * nd, |idx| {
        env.rollout_cost(&problem.domains[idx % nd], state, &sequences[idx / nd])
    });
    let aggregated = costs
        .chunks(nd)
        .map(|row| aggregate(&problem.risk, row))
        .collect::<Result<Vec<_>>>()?;
    Ok((costs, aggregated))
}

/// One SPC iteration from `prev` at `state`.
///
/// `extra` samples (policy proposals) are appended after the Gaussian ones.
pub fn spc_step<R: Rng + ?Sized>(
    problem: &SpcProblem<'_>,
    prev: &ActionSequence,
    state: &EnvState,
    extra: Vec<ActionSequence>,
    rng: &mut R,
) -> Result<(ActionSequence, RolloutBatch)> {
    problem.weighting.validate()?;
    problem.risk.validate()?;
    let mut sequences = sample_proposal(prev, problem.sigma, problem.num_gaussian, rng)?;
    let mut sources = vec![SampleSource::Gaussian; sequences.len()];
    for seq in extra {
        Error::check_len("policy sample", prev.len(), seq.len())?;
        sequences.push(seq);
        sources.push(SampleSource::Policy);
    }
    if sequences.is_empty() {
        return Err(Error::InvalidArgument("an SPC step needs at least one sample".into()));
    }
    let (costs, aggregated) = evaluate_candidates(problem, state, &sequences)?;
    let weights = weight(&problem.weighting, &aggregated)?;
    let best = argmin(&aggregated).ok_or(Error::NoValidRollout)?;
    let mean = update_mean(prev, &sequences, &weights)?;
    Ok((
        mean,
        RolloutBatch {
            sequences,
            sources,
            costs,
            num_domains: problem.domains.len(),
            aggregated,
            weights,
            best,
        },
    ))
}
