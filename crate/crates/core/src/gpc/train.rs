use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{collect_iteration, GpcConfig};
use crate::envs::Env;
use crate::flow::{fit, FlowModel};
use crate::rng::{Purpose, StreamKey};
use crate::{Error, Result};

/// One row of the training curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    /// Mean running cost per control step of the collected episodes.
    pub mean_cost: f64,
    /// Mean loss of every fit epoch.
    pub fit_losses: Vec<f64>,
    pub policy_best_fraction: f64,
    pub records: usize,
    pub rollouts: usize,
    pub diverged_envs: usize,
    /// Seconds spent on this iteration; not part of reproducible output.
    #[serde(skip)]
    pub wall_time: f64,
}

impl IterationStats {
    pub fn final_fit_loss(&self) -> f64 {
        self.fit_losses.last().copied().unwrap_or(f64::NAN)
    }
}

/// Freshly initialized policy matching the spec of `env`.
pub fn init_model(cfg: &GpcConfig, env: &Env) -> Result<FlowModel> {
    let s = &env.spec;
    FlowModel::new(
        s.num_knots,
        s.action_dim,
        s.obs_dim,
        s.horizon_steps(),
        &cfg.hidden,
        cfg.activation,
        StreamKey::new(cfg.seed),
    )
}

/// Alternates data collection and flow fitting for `num_iterations` rounds.
pub fn train(cfg: &GpcConfig, env: &Env) -> Result<(FlowModel, Vec<IterationStats>)> {
    train_with(cfg, env, |_| {})
}

/// [`train`] with a callback after every iteration.
pub fn train_with(
    cfg: &GpcConfig,
    env: &Env,
    mut on_iteration: impl FnMut(&IterationStats),
) -> Result<(FlowModel, Vec<IterationStats>)> {
    cfg.validate()?;
    let key = StreamKey::new(cfg.seed);
    let mut model = init_model(cfg, env)?;
    let mut history = Vec::with_capacity(cfg.num_iterations);
    for iteration in 0..cfg.num_iterations {
        let wrap = |e: Error| Error::Iteration {
            iteration,
            source: Box::new(e),
        };
        let start = Instant::now();
        let (records, collected) = collect_iteration(cfg, env, Some(&model), iteration, key).map_err(wrap)?;
        if records.is_empty() {
            return Err(wrap(Error::InvalidArgument("no records collected".into())));
        }
        let fit_key = key.purpose(Purpose::FitSample).child(iteration as u64);
        let fit_losses = fit(&mut model, &records, &cfg.fit, fit_key).map_err(wrap)?;
        let stats = IterationStats {
            iteration,
            mean_cost: collected.mean_cost,
            fit_losses,
            policy_best_fraction: collected.policy_best_fraction,
            records: records.len(),
            rollouts: collected.rollouts,
            diverged_envs: collected.diverged_envs,
            wall_time: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "iteration {iteration}: cost/step {:.4}, fit loss {:.4}, policy best {:.3}, {:.1}s",
            stats.mean_cost,
            stats.final_fit_loss(),
            stats.policy_best_fraction,
            stats.wall_time
        );
        on_iteration(&stats);
        history.push(stats);
    }
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::EnvKind;

    fn tiny() -> GpcConfig {
        let mut cfg = GpcConfig::for_env(EnvKind::Pendulum);
        cfg.num_iterations = 2;
        cfg.num_envs = 3;
        cfg.num_gaussian = 4;
        cfg.episode_len = 0.2;
        cfg.fit.epochs = 2;
        cfg.fit.batch_size = 8;
        cfg.hidden = vec![8];
        cfg
    }

    #[test]
    fn one_row_per_iteration_and_reproducible() {
        let env = Env::new(EnvKind::Pendulum);
        let (m1, h1) = train(&tiny(), &env).unwrap();
        let (m2, h2) = train(&tiny(), &env).unwrap();
        assert_eq!(h1.len(), 2);
        assert_eq!(m1, m2);
        for (a, b) in h1.iter().zip(&h2) {
            assert_eq!(a.fit_losses, b.fit_losses);
            assert_eq!(a.mean_cost, b.mean_cost);
            assert_eq!(a.records, 30);
            assert_eq!(a.rollouts, 30 * 6);
        }
    }

    #[test]
    fn behaviour_cloning_without_policy_samples() {
        let env = Env::new(EnvKind::Pendulum);
        let cfg = GpcConfig {
            num_iterations: 1,
            num_policy: 0,
            ..tiny()
        };
        let (model, hist) = train(&cfg, &env).unwrap();
        assert_eq!(hist[0].policy_best_fraction, 0.0);
        assert_ne!(model, init_model(&cfg, &env).unwrap());
    }
}
