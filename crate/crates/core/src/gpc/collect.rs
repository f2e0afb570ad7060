use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::GpcConfig;
use crate::envs::{DomainParams, Env};
use crate::flow::{sample, FlowModel, TrainRecord};
use crate::rng::{Purpose, StreamKey};
use crate::spc::{spc_step, ActionSequence, RolloutBatch, SampleSource, SpcProblem};
use crate::{par, Error, Result};

/// Totals gathered while collecting one iteration of data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CollectStats {
    /// Mean running cost per applied control step.
    pub mean_cost: f64,
    /// Fraction of SPC steps whose lowest-cost sample came from the policy.
    pub policy_best_fraction: f64,
    /// Control steps actually simulated.
    pub steps: usize,
    /// Candidate rollouts evaluated, counted over every domain.
    pub rollouts: usize,
    pub diverged_envs: usize,
}

/// Zero-mean Gaussian plan with per-knot std `sigma`, clamped.
pub(crate) fn initial_mean<R: Rng + ?Sized>(env: &Env, sigma: f64, rng: &mut R) -> ActionSequence {
    let spec = &env.spec;
    let knots = (0..spec.num_knots * spec.action_dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sigma * z
        })
        .collect();
    ActionSequence::from_knots(knots, spec.num_knots, spec.action_dim, spec.horizon_steps())
        .expect("spec shapes are consistent")
        .clamped()
}

/// `n` policy draws from pure noise, one substream per sample.
pub(crate) fn policy_samples(model: &FlowModel, obs: &[f64], n: usize, dt: f64, key: StreamKey) -> Result<Vec<ActionSequence>> {
    (0..n)
        .map(|p| {
            let mut rng = key.child(p as u64).rng();
            let u0: Vec<f64> = (0..model.flat_dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
            sample(model, obs, &u0, dt)
        })
        .collect()
}

/// Planning domains for one environment of one iteration.
pub(crate) fn planning_domains(env: &Env, num_domains: usize, spread: f64, key: StreamKey) -> Vec<DomainParams> {
    if num_domains <= 1 {
        return vec![env.nominal];
    }
    let mut rng = key.rng();
    (0..num_domains).map(|_| env.nominal.randomized(spread, &mut rng)).collect()
}

struct EnvOutcome {
    records: Vec<TrainRecord>,
    cost: f64,
    steps: usize,
    policy_best: usize,
    rollouts: usize,
    diverged: bool,
}

fn run_env(
    cfg: &GpcConfig,
    env: &Env,
    model: Option<&FlowModel>,
    iteration: usize,
    j: usize,
    key: StreamKey,
    mut on_batch: impl FnMut(&RolloutBatch),
) -> Result<EnvOutcome> {
    let path = [iteration as u64, j as u64];
    let domains = planning_domains(env, cfg.num_domains, cfg.domain_spread, key.purpose(Purpose::Domains).path(&path));
    let problem = SpcProblem {
        env,
        domains: &domains,
        weighting: cfg.weighting,
        risk: cfg.risk,
        sigma: cfg.sigma,
        num_gaussian: cfg.num_gaussian,
    };
    let mut state = env.sample_initial_state(&mut key.purpose(Purpose::InitialState).path(&path).rng());
    let mut mean = initial_mean(env, cfg.sigma, &mut key.purpose(Purpose::InitialMean).path(&path).rng());
    let steps = env.spec.steps_for(cfg.episode_len);
    let mut out = EnvOutcome {
        records: Vec::with_capacity(steps),
        cost: 0.0,
        steps: 0,
        policy_best: 0,
        rollouts: 0,
        diverged: false,
    };
    for k in 0..steps {
        let obs = env.observe(&state);
        let extra = match (model, cfg.num_policy) {
            (_, 0) => Vec::new(),
            (Some(m), n) => policy_samples(m, &obs, n, cfg.flow_dt, key.purpose(Purpose::PolicyNoise).path(&[iteration as u64, j as u64, k as u64]))?,
            (None, _) => return Err(Error::InvalidArgument("policy samples requested without a model".into())),
        };
        let mut rng = key.purpose(Purpose::Proposal).path(&[iteration as u64, j as u64, k as u64]).rng();
        let (next, batch) = spc_step(&problem, &mean, &state, extra, &mut rng)?;
        on_batch(&batch);
        out.rollouts += batch.num_rollouts();
        out.policy_best += usize::from(batch.best_source() == SampleSource::Policy);
        let u = env.denormalize(next.first_action());
        let u = &u[..env.spec.action_dim];
        out.cost += env.running_cost(&state, u);
        out.records.push(TrainRecord {
            obs,
            target: next.knots().to_vec(),
            prev: mean.knots().to_vec(),
            env_id: j,
            step: k,
        });
        out.steps += 1;
        match env.step(&env.nominal, &state, u) {
            Ok(s) => state = s,
            Err(Error::Diverged { step }) => {
                log::warn!("environment {j} diverged at step {step}; dropping its remaining steps");
                out.diverged = true;
                break;
            }
            Err(e) => return Err(e),
        }
        mean = next.shifted();
    }
    Ok(out)
}

/// Runs `num_envs` SPC episodes in parallel and returns the harvested
/// records ordered by environment then step.
pub fn collect_iteration(
    cfg: &GpcConfig,
    env: &Env,
    model: Option<&FlowModel>,
    iteration: usize,
    key: StreamKey,
) -> Result<(Vec<TrainRecord>, CollectStats)> {
    collect_with(cfg, env, model, iteration, key, |_, _| {})
}

/// Like [`collect_iteration`], also handing every SPC batch to `on_batch`
/// together with its environment index.
pub fn collect_with<F>(
    cfg: &GpcConfig,
    env: &Env,
    model: Option<&FlowModel>,
    iteration: usize,
    key: StreamKey,
    on_batch: F,
) -> Result<(Vec<TrainRecord>, CollectStats)>
where
    F: Fn(usize, &RolloutBatch) + Sync,
{
    cfg.validate()?;
    if env.kind() != cfg.env {
        return Err(Error::InvalidArgument(format!("config is for {} but env is {}", cfg.env, env.kind())));
    }
    let outcomes = par::map_range(cfg.num_envs, |j| run_env(cfg, env, model, iteration, j, key, |b| on_batch(j, b)));
    let mut records = Vec::new();
    let mut stats = CollectStats::default();
    let mut cost = 0.0;
    let mut policy_best = 0;
    for o in outcomes {
        let o = o?;
        records.extend(o.records);
        cost += o.cost;
        stats.steps += o.steps;
        policy_best += o.policy_best;
        stats.rollouts += o.rollouts;
        stats.diverged_envs += usize::from(o.diverged);
    }
    if stats.steps > 0 {
        stats.mean_cost = cost / stats.steps as f64;
        stats.policy_best_fraction = policy_best as f64 / stats.steps as f64;
    }
    Ok((records, stats))
}
