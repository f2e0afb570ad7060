use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::collect::{initial_mean, policy_samples};
use super::GpcConfig;
use crate::envs::{DomainParams, Env, EnvState};
use crate::flow::{sample, warm_start_noise, FlowModel};
use crate::rng::{Purpose, StreamKey};
use crate::spc::{spc_step, ActionSequence, SampleSource, SpcProblem};
use crate::{par, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EvalMode {
    #[serde(rename = "spc")]
    Spc,
    #[serde(rename = "gpc")]
    Gpc,
    #[serde(rename = "gpc+")]
    GpcPlus,
}

impl EvalMode {
    pub const ALL: [EvalMode; 3] = [EvalMode::Spc, EvalMode::Gpc, EvalMode::GpcPlus];

    pub fn name(self) -> &'static str {
        match self {
            EvalMode::Spc => "spc",
            EvalMode::Gpc => "gpc",
            EvalMode::GpcPlus => "gpc+",
        }
    }

    pub fn needs_model(self) -> bool {
        self != EvalMode::Spc
    }
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "spc" => Ok(EvalMode::Spc),
            "gpc" => Ok(EvalMode::Gpc),
            "gpc+" | "gpc_plus" | "gpcplus" => Ok(EvalMode::GpcPlus),
            other => Err(Error::InvalidArgument(format!("unknown mode '{other}' (expected spc, gpc or gpc+)"))),
        }
    }
}

/// How a closed-loop evaluation is run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub mode: EvalMode,
    pub episodes: usize,
    /// Warm-start level for GPC.
    pub alpha: f64,
    /// Samples per SPC step for SPC and GPC+; GPC+ splits them evenly.
    pub num_samples: usize,
    /// Episode length in seconds.
    pub episode_len: f64,
    /// Dynamics of the simulated plant; the planner always uses the nominal model.
    pub plant: Option<DomainParams>,
    /// Fixed initial state for every episode instead of seeded draws.
    pub start: Option<EnvState>,
    pub seed: u64,
}

impl EvalOptions {
    pub fn new(cfg: &GpcConfig, mode: EvalMode, episodes: usize, alpha: f64, seed: u64) -> Self {
        Self {
            mode,
            episodes,
            alpha,
            num_samples: cfg.eval_samples,
            episode_len: cfg.eval_episode_len,
            plant: None,
            start: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if self.episodes == 0 {
            return Err(Error::InvalidArgument("at least one episode is required".into()));
        }
        if !(self.episode_len.is_finite() && self.episode_len > 0.0) {
            return Err(Error::InvalidArgument(format!("episode length must be positive, got {}", self.episode_len)));
        }
        if self.mode == EvalMode::GpcPlus && self.num_samples < 2 {
            return Err(Error::InvalidArgument("GPC+ needs at least two samples per step".into()));
        }
        if self.start.is_some_and(|s| !s.is_finite()) {
            return Err(Error::NonFinite("fixed start state".into()));
        }
        if self.mode == EvalMode::Spc && self.num_samples == 0 {
            return Err(Error::InvalidArgument("SPC needs at least one sample per step".into()));
        }
        Ok(())
    }
}

/// Full record of one closed-loop episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    /// `x_0 .. x_K`; shorter when the plant diverged.
    pub states: Vec<EnvState>,
    /// Applied normalized actions `u_0 .. u_{K-1}`.
    pub actions: Vec<Vec<f64>>,
    /// Plan each action was taken from.
    pub plans: Vec<ActionSequence>,
    pub running_costs: Vec<f64>,
    /// Steps whose lowest-cost sample came from the policy (GPC+ only).
    pub policy_best: usize,
    pub diverged: bool,
}

/// Summary of one evaluated episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    /// Mean running cost per step; `+inf` for a diverged episode.
    pub cost_per_step: f64,
    pub success: bool,
    /// Mean `|u_k - u_{k-1}|` of the applied normalized actions.
    pub roughness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub alpha: f64,
    pub episodes: Vec<EpisodeResult>,
    /// Mean and population std of the cost per step over non-diverged episodes.
    pub mean_cost: f64,
    pub std_cost: f64,
    pub success_rate: f64,
    pub roughness: f64,
}

impl EvalReport {
    pub fn from_episodes(mode: EvalMode, alpha: f64, episodes: Vec<EpisodeResult>) -> Self {
        let finite: Vec<&EpisodeResult> = episodes.iter().filter(|e| e.cost_per_step.is_finite()).collect();
        let n = finite.len() as f64;
        let (mean_cost, std_cost, roughness) = if finite.is_empty() {
            (f64::INFINITY, f64::NAN, f64::NAN)
        } else {
            let mean = finite.iter().map(|e| e.cost_per_step).sum::<f64>() / n;
            let var = finite.iter().map(|e| (e.cost_per_step - mean).powi(2)).sum::<f64>() / n;
            let rough = finite.iter().map(|e| e.roughness).sum::<f64>() / n;
            (mean, var.sqrt(), rough)
        };
        let success_rate = if episodes.is_empty() {
            0.0
        } else {
            episodes.iter().filter(|e| e.success).count() as f64 / episodes.len() as f64
        };
        Self {
            mode,
            alpha,
            episodes,
            mean_cost,
            std_cost,
            success_rate,
            roughness,
        }
    }
}

/// Mean Euclidean distance between consecutive actions.
pub fn roughness(actions: &[Vec<f64>]) -> f64 {
    if actions.len() < 2 {
        return 0.0;
    }
    let total: f64 = actions
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .sum();
    total / (actions.len() - 1) as f64
}

/// Closed-loop controller for one episode in any evaluation mode.
pub struct Planner<'a> {
    cfg: &'a GpcConfig,
    env: &'a Env,
    model: Option<&'a FlowModel>,
    mode: EvalMode,
    alpha: f64,
    num_gaussian: usize,
    num_policy: usize,
    key: StreamKey,
    mean: ActionSequence,
    last_plan: Option<ActionSequence>,
    step: usize,
}

/// Output of one planning call.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanStep {
    pub plan: ActionSequence,
    /// Whether a policy sample had the lowest cost (SPC-based modes only).
    pub policy_best: bool,
    pub rollouts: usize,
}

impl<'a> Planner<'a> {
    /// `key` names the episode; every random draw is derived from it.
    pub fn new(
        cfg: &'a GpcConfig,
        env: &'a Env,
        model: Option<&'a FlowModel>,
        opts: &EvalOptions,
        key: StreamKey,
    ) -> Result<Self> {
        let model = match (opts.mode.needs_model(), model) {
            (true, None) => return Err(Error::InvalidArgument(format!("{} evaluation needs a model", opts.mode))),
            (true, Some(m)) => Some(m),
            (false, _) => None,
        };
        let (num_gaussian, num_policy) = match opts.mode {
            EvalMode::Spc => (opts.num_samples, 0),
            EvalMode::Gpc => (0, 0),
            EvalMode::GpcPlus => (opts.num_samples - opts.num_samples / 2, opts.num_samples / 2),
        };
        Ok(Self {
            cfg,
            env,
            model,
            mode: opts.mode,
            alpha: opts.alpha,
            num_gaussian,
            num_policy,
            key,
            mean: initial_mean(env, cfg.sigma, &mut key.purpose(Purpose::InitialMean).rng()),
            last_plan: None,
            step: 0,
        })
    }

    /// Plans from `state` and advances the internal step counter.
    pub fn plan(&mut self, state: &EnvState) -> Result<PlanStep> {
        let env = self.env;
        let obs = env.observe(state);
        let step_key = |p: Purpose| self.key.purpose(p).child(self.step as u64);
        let out = match self.mode {
            EvalMode::Gpc => {
                let m = self.model.expect("checked in new");
                let mut rng = step_key(Purpose::WarmStart).rng();
                let u0 = match &self.last_plan {
                    Some(prev) => warm_start_noise(prev.shifted().knots(), self.alpha, &mut rng)?,
                    // nothing to warm-start from on the first step
                    None => warm_start_noise(&vec![0.0; m.flat_dim()], 0.0, &mut rng)?,
                };
                PlanStep {
                    plan: sample(m, &obs, &u0, self.cfg.flow_dt)?,
                    policy_best: false,
                    rollouts: 0,
                }
            }
            EvalMode::Spc | EvalMode::GpcPlus => {
                let domains = [env.nominal];
                let problem = SpcProblem {
                    env,
                    domains: &domains,
                    weighting: self.cfg.weighting,
                    risk: self.cfg.risk,
                    sigma: self.cfg.sigma,
                    num_gaussian: self.num_gaussian,
                };
                let extra = match self.model {
                    Some(m) if self.num_policy > 0 => {
                        policy_samples(m, &obs, self.num_policy, self.cfg.flow_dt, step_key(Purpose::PolicyNoise))?
                    }
                    _ => Vec::new(),
                };
                let (next, batch) = spc_step(&problem, &self.mean, state, extra, &mut step_key(Purpose::Proposal).rng())?;
                self.mean = next.shifted();
                PlanStep {
                    plan: next,
                    policy_best: batch.best_source() == SampleSource::Policy,
                    rollouts: batch.num_rollouts(),
                }
            }
        };
        self.last_plan = Some(out.plan.clone());
        self.step += 1;
        Ok(out)
    }
}

/// Runs episode `episode` of an evaluation and keeps the full trace.
///
/// Initial states depend only on `(seed, episode)`, so different modes are
/// compared on matched starts.
pub fn run_episode(
    cfg: &GpcConfig,
    env: &Env,
    model: Option<&FlowModel>,
    opts: &EvalOptions,
    episode: usize,
) -> Result<EpisodeTrace> {
    let plant = opts.plant.unwrap_or(env.nominal);
    env.check_params(&plant)?;
    let key = StreamKey::new(opts.seed).purpose(Purpose::Eval).child(episode as u64);
    let mut planner = Planner::new(cfg, env, model, opts, key)?;
    let mut state = match opts.start {
        Some(s) => s,
        None => env.sample_initial_state(&mut key.purpose(Purpose::InitialState).rng()),
    };
    let steps = env.spec.steps_for(opts.episode_len);
    let mut trace = EpisodeTrace {
        states: vec![state],
        actions: Vec::with_capacity(steps),
        plans: Vec::with_capacity(steps),
        running_costs: Vec::with_capacity(steps),
        policy_best: 0,
        diverged: false,
    };
    for _ in 0..steps {
        let out = planner.plan(&state)?;
        trace.policy_best += usize::from(out.policy_best);
        let action = out.plan.first_action().to_vec();
        let u = env.denormalize(&action);
        let u = &u[..env.spec.action_dim];
        trace.running_costs.push(env.running_cost(&state, u));
        trace.actions.push(action);
        trace.plans.push(out.plan);
        match env.step(&plant, &state, u) {
            Ok(s) => {
                state = s;
                trace.states.push(s);
            }
            Err(Error::Diverged { step }) => {
                log::warn!("episode {episode} diverged at step {step}");
                trace.diverged = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(trace)
}

fn summarize(env: &Env, trace: &EpisodeTrace) -> EpisodeResult {
    if trace.diverged || trace.running_costs.is_empty() {
        return EpisodeResult {
            cost_per_step: f64::INFINITY,
            success: false,
            roughness: roughness(&trace.actions),
        };
    }
    EpisodeResult {
        cost_per_step: trace.running_costs.iter().sum::<f64>() / trace.running_costs.len() as f64,
        success: env.is_success(&trace.states),
        roughness: roughness(&trace.actions),
    }
}

/// Evaluates `opts.episodes` seeded episodes in parallel.
pub fn evaluate(cfg: &GpcConfig, env: &Env, model: Option<&FlowModel>, opts: &EvalOptions) -> Result<EvalReport> {
    cfg.validate()?;
    opts.validate()?;
    if let Some(m) = model {
        m.validate()?;
        Error::check_len("model observation", env.spec.obs_dim, m.obs_dim)?;
        Error::check_len("model knots", env.spec.num_knots * env.spec.action_dim, m.flat_dim())?;
    }
    let results = par::map_range(opts.episodes, |e| run_episode(cfg, env, model, opts, e).map(|t| summarize(env, &t)));
    let episodes = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_episodes(opts.mode, opts.alpha, episodes))
}
