//! Flat TOML run configuration.
//!
//! Every key is optional; missing keys take the defaults of the selected
//! environment. Unknown keys are rejected.

use std::fmt::Write as _;
use std::path::Path;

use gpc_core::envs::EnvKind;
use gpc_core::gpc::{EvalMode, GpcConfig};
use gpc_core::net::Activation;
use gpc_core::spc::{RiskAggregator, WeightingFn};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    env: Option<String>,
    seed: Option<u64>,
    num_iterations: Option<usize>,
    num_envs: Option<usize>,
    num_gaussian: Option<usize>,
    num_policy: Option<usize>,
    episode_len: Option<f64>,
    sigma: Option<f64>,
    weighting: Option<String>,
    lambda: Option<f64>,
    num_elites: Option<usize>,
    tsallis_r: Option<f64>,
    risk: Option<String>,
    cvar_beta: Option<f64>,
    num_domains: Option<usize>,
    domain_spread: Option<f64>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    learning_rate: Option<f64>,
    gamma: Option<f64>,
    hidden: Option<Vec<usize>>,
    activation: Option<String>,
    flow_dt: Option<f64>,
    eval_samples: Option<usize>,
    eval_episode_len: Option<f64>,
    eval_episodes: Option<usize>,
    eval_alpha: Option<f64>,
    eval_mode: Option<String>,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub gpc: GpcConfig,
    pub eval_episodes: usize,
    pub eval_alpha: f64,
    pub eval_mode: EvalMode,
}

impl RunConfig {
    pub fn defaults(env: EnvKind) -> Self {
        Self {
            gpc: GpcConfig::for_env(env),
            eval_episodes: 100,
            eval_alpha: 1.0,
            eval_mode: EvalMode::Gpc,
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        resolve(raw, text)
    }

    /// TOML document listing every resolved value; it parses back to `self`.
    pub fn to_toml(&self) -> String {
        let g = &self.gpc;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let q = |v: &str| format!("\"{v}\"");
        kv("env", q(g.env.name()));
        kv("seed", g.seed.to_string());
        kv("num_iterations", g.num_iterations.to_string());
        kv("num_envs", g.num_envs.to_string());
        kv("num_gaussian", g.num_gaussian.to_string());
        kv("num_policy", g.num_policy.to_string());
        kv("episode_len", float(g.episode_len));
        kv("sigma", float(g.sigma));
        kv("weighting", q(g.weighting.name()));
        match g.weighting {
            WeightingFn::Mppi { lambda } => kv("lambda", float(lambda)),
            WeightingFn::Cem { num_elites } => kv("num_elites", num_elites.to_string()),
            WeightingFn::Tsallis { lambda, r } => {
                kv("lambda", float(lambda));
                kv("tsallis_r", float(r));
            }
            WeightingFn::PredictiveSampling => {}
        }
        kv("risk", q(g.risk.name()));
        if let RiskAggregator::Cvar { beta } = g.risk {
            kv("cvar_beta", float(beta));
        }
        kv("num_domains", g.num_domains.to_string());
        kv("domain_spread", float(g.domain_spread));
        kv("epochs", g.fit.epochs.to_string());
        kv("batch_size", g.fit.batch_size.to_string());
        kv("learning_rate", float(g.fit.learning_rate));
        kv("gamma", float(g.fit.gamma));
        let hidden: Vec<String> = g.hidden.iter().map(|h| h.to_string()).collect();
        kv("hidden", format!("[{}]", hidden.join(", ")));
        kv("activation", q(g.activation.name()));
        kv("flow_dt", float(g.flow_dt));
        kv("eval_samples", g.eval_samples.to_string());
        kv("eval_episode_len", float(g.eval_episode_len));
        kv("eval_episodes", self.eval_episodes.to_string());
        kv("eval_alpha", float(self.eval_alpha));
        kv("eval_mode", q(self.eval_mode.name()));
        s
    }
}

/// TOML float literal that always carries a decimal point.
fn float(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains(['.', 'e', 'n', 'i']) {
        s
    } else {
        format!("{s}.0")
    }
}

fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

fn resolve(raw: RawConfig, text: &str) -> Result<RunConfig, CliError> {
    let fail = |key: &str, msg: String| {
        let msg = match line_of(text, key) {
            Some(line) => format!("line {line}: {key}: {msg}"),
            None => format!("{key}: {msg}"),
        };
        CliError::Config(msg)
    };
    let env = match &raw.env {
        Some(name) => name.parse::<EnvKind>().map_err(|e| fail("env", e.to_string()))?,
        None => EnvKind::Pendulum,
    };
    let mut run = RunConfig::defaults(env);
    let g = &mut run.gpc;
    macro_rules! set {
        ($($field:ident => $target:expr),* $(,)?) => {
            $(if let Some(v) = raw.$field { $target = v; })*
        };
    }
    set! {
        seed => g.seed,
        num_iterations => g.num_iterations,
        num_envs => g.num_envs,
        num_gaussian => g.num_gaussian,
        num_policy => g.num_policy,
        episode_len => g.episode_len,
        sigma => g.sigma,
        num_domains => g.num_domains,
        domain_spread => g.domain_spread,
        epochs => g.fit.epochs,
        batch_size => g.fit.batch_size,
        learning_rate => g.fit.learning_rate,
        gamma => g.fit.gamma,
        flow_dt => g.flow_dt,
        eval_samples => g.eval_samples,
        eval_episode_len => g.eval_episode_len,
        eval_episodes => run.eval_episodes,
        eval_alpha => run.eval_alpha,
    }
    let g = &mut run.gpc;
    if let Some(h) = raw.hidden {
        g.hidden = h;
    }
    if let Some(a) = &raw.activation {
        g.activation = a.parse::<Activation>().map_err(|e| fail("activation", e.to_string()))?;
    }
    let weighting = raw.weighting.as_deref().unwrap_or(g.weighting.name());
    let unused = |key: &str, present: bool| -> Result<(), CliError> {
        if present {
            Err(fail(key, format!("has no effect with weighting '{weighting}'")))
        } else {
            Ok(())
        }
    };
    g.weighting = match weighting {
        "ps" | "predictive_sampling" => {
            unused("lambda", raw.lambda.is_some())?;
            unused("num_elites", raw.num_elites.is_some())?;
            unused("tsallis_r", raw.tsallis_r.is_some())?;
            WeightingFn::PredictiveSampling
        }
        "mppi" => {
            unused("num_elites", raw.num_elites.is_some())?;
            unused("tsallis_r", raw.tsallis_r.is_some())?;
            WeightingFn::Mppi {
                lambda: raw.lambda.unwrap_or(0.1),
            }
        }
        "cem" => {
            unused("lambda", raw.lambda.is_some())?;
            unused("tsallis_r", raw.tsallis_r.is_some())?;
            WeightingFn::Cem {
                num_elites: raw.num_elites.unwrap_or(4),
            }
        }
        "tsallis" => {
            unused("num_elites", raw.num_elites.is_some())?;
            WeightingFn::Tsallis {
                lambda: raw.lambda.unwrap_or(0.1),
                r: raw.tsallis_r.unwrap_or(1.5),
            }
        }
        other => {
            return Err(fail(
                "weighting",
                format!("unknown weighting '{other}' (expected ps, mppi, cem or tsallis)"),
            ))
        }
    };
    g.weighting
        .validate()
        .map_err(|e| fail(weighting_key(&g.weighting), e.to_string()))?;
    let risk = raw.risk.as_deref().unwrap_or(g.risk.name());
    g.risk = match risk {
        "average" => RiskAggregator::Average,
        "worst_case" => RiskAggregator::WorstCase,
        "cvar" => RiskAggregator::Cvar {
            beta: raw.cvar_beta.unwrap_or(0.25),
        },
        other => {
            return Err(fail(
                "risk",
                format!("unknown risk aggregator '{other}' (expected average, worst_case or cvar)"),
            ))
        }
    };
    if raw.cvar_beta.is_some() && !matches!(g.risk, RiskAggregator::Cvar { .. }) {
        return Err(fail("cvar_beta", format!("has no effect with risk '{risk}'")));
    }
    g.risk.validate().map_err(|e| fail("cvar_beta", e.to_string()))?;
    if let Some(m) = &raw.eval_mode {
        run.eval_mode = m.parse::<EvalMode>().map_err(|e| fail("eval_mode", e.to_string()))?;
    }
    if !(0.0..=1.0).contains(&run.eval_alpha) {
        return Err(fail("eval_alpha", format!("must lie in [0, 1], got {}", run.eval_alpha)));
    }
    if run.eval_episodes == 0 {
        return Err(fail("eval_episodes", "must be at least 1".into()));
    }
    if let Err(e) = run.gpc.validate() {
        let msg = e.to_string();
        let bare = msg.trim_start_matches("invalid argument: ");
        let key = KEYS.iter().find(|k| bare.starts_with(**k)).copied().unwrap_or("config");
        return Err(fail(key, msg));
    }
    Ok(run)
}

fn weighting_key(w: &WeightingFn) -> &'static str {
    match w {
        WeightingFn::Cem { .. } => "num_elites",
        WeightingFn::Tsallis { .. } => "tsallis_r",
        _ => "lambda",
    }
}

const KEYS: &[&str] = &[
    "num_iterations",
    "num_envs",
    "num_gaussian",
    "num_domains",
    "epochs",
    "batch_size",
    "eval_samples",
    "episode_len",
    "sigma",
    "learning_rate",
    "eval_episode_len",
    "gamma",
    "domain_spread",
    "flow_dt",
    "hidden",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_pendulum_defaults() {
        let run = RunConfig::parse("").unwrap();
        assert_eq!(run, RunConfig::defaults(EnvKind::Pendulum));
    }

    #[test]
    fn resolved_echo_round_trips() {
        let text = "env = \"cartpole\"\nweighting = \"tsallis\"\nlambda = 0.5\nrisk = \"cvar\"\ncvar_beta = 0.5\nnum_domains = 4\nhidden = [16, 8]\n";
        let run = RunConfig::parse(text).unwrap();
        assert_eq!(run.gpc.fit.epochs, 100);
        let echo = run.to_toml();
        assert_eq!(RunConfig::parse(&echo).unwrap(), run);
        for key in ["env", "sigma", "eval_mode", "tsallis_r", "cvar_beta", "flow_dt"] {
            assert!(echo.lines().any(|l| l.starts_with(&format!("{key} ="))), "{key} missing");
        }
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::parse("sigma = 0.2\nsigmaa = 0.3\n").unwrap_err().to_string();
        assert!(err.contains("sigmaa"), "{err}");
    }

    #[test]
    fn range_errors_carry_line_numbers() {
        let err = RunConfig::parse("env = \"pendulum\"\n\nsigma = -1.0\n").unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("sigma"), "{err}");
        let err = RunConfig::parse("eval_alpha = 2.0").unwrap_err().to_string();
        assert!(err.contains("line 1"), "{err}");
        let err = RunConfig::parse("env = \"mars\"").unwrap_err().to_string();
        assert!(err.contains("mars"), "{err}");
        let err = RunConfig::parse("lambda = 0.1").unwrap_err().to_string();
        assert!(err.contains("lambda"), "{err}");
    }

    #[test]
    fn float_literals_stay_floats() {
        assert_eq!(float(1.0), "1.0");
        assert_eq!(float(0.1), "0.1");
        assert_eq!(float(1e-8), "1e-8");
    }
}
