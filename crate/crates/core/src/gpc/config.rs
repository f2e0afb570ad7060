use serde::{Deserialize, Serialize};

use crate::envs::EnvKind;
use crate::flow::{FitConfig, DEFAULT_GAMMA};
use crate::net::Activation;
use crate::spc::{RiskAggregator, WeightingFn};
use crate::{Error, Result};

/// Everything that defines a training run and the default evaluation budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpcConfig {
    pub env: EnvKind,
    pub num_iterations: usize,
    /// Parallel environments per iteration (`N_E`).
    pub num_envs: usize,
    /// Gaussian samples per SPC step (`N_S`).
    pub num_gaussian: usize,
    /// Policy samples per SPC step (`N_P`).
    pub num_policy: usize,
    /// Training episode length in seconds.
    pub episode_len: f64,
    pub sigma: f64,
    pub weighting: WeightingFn,
    pub risk: RiskAggregator,
    /// Planning domains per environment (`N_D`); `1` plans on the nominal model.
    pub num_domains: usize,
    /// Relative spread of randomized domain parameters.
    pub domain_spread: f64,
    pub fit: FitConfig,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Euler step of flow sampling.
    pub flow_dt: f64,
    pub seed: u64,
    /// Samples per SPC step when evaluating SPC and GPC+.
    pub eval_samples: usize,
    /// Evaluation episode length in seconds.
    pub eval_episode_len: f64,
}

impl GpcConfig {
    /// Default hyperparameters for `env`.
    pub fn for_env(env: EnvKind) -> Self {
        let base = Self {
            env,
            num_iterations: 10,
            num_envs: 128,
            num_gaussian: 8,
            num_policy: 2,
            episode_len: 4.0,
            sigma: 0.3,
            weighting: WeightingFn::PredictiveSampling,
            risk: RiskAggregator::Average,
            num_domains: 1,
            domain_spread: 0.3,
            fit: FitConfig {
                epochs: 10,
                batch_size: 128,
                learning_rate: 1e-3,
                gamma: DEFAULT_GAMMA,
            },
            hidden: vec![64, 64],
            activation: Activation::Swish,
            flow_dt: 0.1,
            seed: 0,
            eval_samples: 128,
            eval_episode_len: 10.0,
        };
        match env {
            EnvKind::Pendulum => base,
            EnvKind::CartPole => Self {
                episode_len: 2.0,
                fit: FitConfig {
                    epochs: 100,
                    ..base.fit
                },
                ..base
            },
            EnvKind::DoubleCartpole => Self {
                num_iterations: 50,
                num_envs: 256,
                num_gaussian: 16,
                num_policy: 16,
                ..base
            },
            EnvKind::Nav2d => Self {
                num_iterations: 5,
                num_envs: 64,
                num_gaussian: 16,
                num_policy: 4,
                episode_len: 2.0,
                fit: FitConfig {
                    epochs: 50,
                    ..base.fit
                },
                eval_episode_len: 4.0,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("num_iterations", self.num_iterations),
            ("num_envs", self.num_envs),
            ("num_gaussian", self.num_gaussian),
            ("num_domains", self.num_domains),
            ("epochs", self.fit.epochs),
            ("batch_size", self.fit.batch_size),
            ("eval_samples", self.eval_samples),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
            }
        }
        let finite_positive = [
            ("episode_len", self.episode_len),
            ("sigma", self.sigma),
            ("learning_rate", self.fit.learning_rate),
            ("eval_episode_len", self.eval_episode_len),
        ];
        for (name, v) in finite_positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.fit.gamma.is_finite() && self.fit.gamma >= 0.0) {
            return Err(Error::InvalidArgument(format!("gamma must be non-negative, got {}", self.fit.gamma)));
        }
        if !(0.0..1.0).contains(&self.domain_spread) {
            return Err(Error::InvalidArgument(format!(
                "domain_spread must lie in [0, 1), got {}",
                self.domain_spread
            )));
        }
        let steps = (1.0 / self.flow_dt).round();
        if !(self.flow_dt > 0.0 && self.flow_dt <= 1.0) || (steps * self.flow_dt - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("flow_dt must divide 1, got {}", self.flow_dt)));
        }
        if self.hidden.contains(&0) {
            return Err(Error::InvalidArgument("hidden layer widths must be positive".into()));
        }
        if self.eval_samples < 2 {
            return Err(Error::InvalidArgument("eval_samples must be at least 2 to split GPC+ samples".into()));
        }
        self.weighting.validate()?;
        self.risk.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for kind in EnvKind::ALL {
            GpcConfig::for_env(kind).validate().unwrap();
        }
        let p = GpcConfig::for_env(EnvKind::Pendulum);
        assert_eq!((p.num_iterations, p.num_envs, p.num_gaussian, p.num_policy), (10, 128, 8, 2));
        assert_eq!((p.episode_len, p.fit.epochs), (4.0, 10));
        let d = GpcConfig::for_env(EnvKind::DoubleCartpole);
        assert_eq!((d.num_iterations, d.num_envs, d.num_gaussian, d.num_policy), (50, 256, 16, 16));
        let c = GpcConfig::for_env(EnvKind::CartPole);
        assert_eq!((c.episode_len, c.fit.epochs), (2.0, 100));
    }

    #[test]
    fn invalid_values_are_rejected() {
        let base = GpcConfig::for_env(EnvKind::Pendulum);
        let cases = [
            GpcConfig { num_envs: 0, ..base.clone() },
            GpcConfig { sigma: -0.1, ..base.clone() },
            GpcConfig { flow_dt: 0.3, ..base.clone() },
            GpcConfig { domain_spread: 1.0, ..base.clone() },
            GpcConfig { risk: RiskAggregator::Cvar { beta: 1.0 }, ..base.clone() },
        ];
        for c in cases {
            assert!(c.validate().is_err(), "{c:?}");
        }
        // no policy samples is allowed
        GpcConfig { num_policy: 0, ..base }.validate().unwrap();
    }
}
