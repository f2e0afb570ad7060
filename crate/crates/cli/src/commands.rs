//! Implementations of the `train`, `eval`, `rollout` and `bench` commands.

use std::path::{Path, PathBuf};
use std::time::Instant;

use gpc_core::envs::{Env, EnvKind};
use gpc_core::flow::FlowModel;
use gpc_core::gpc::{evaluate, init_model, run_episode, train_with, EvalMode, EvalOptions, EvalReport, GpcConfig, Planner};
use gpc_core::rng::{Purpose, StreamKey};
use serde::Serialize;

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::CliError;

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const CURVES_FILE: &str = "training_curves.csv";
pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.toml";
pub const EVAL_FILE: &str = "eval_report.csv";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const BENCH_FILE: &str = "bench.csv";

fn create_dir(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Runtime(format!("cannot create output directory {}: {e}", out.display())))
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub checkpoint: Checkpoint,
    pub checkpoint_path: PathBuf,
}

/// Trains a policy and writes the checkpoint, curves and resolved config.
pub fn train(run: &RunConfig, out: &Path) -> Result<TrainOutput, CliError> {
    create_dir(out)?;
    std::fs::write(out.join(RESOLVED_CONFIG_FILE), run.to_toml())?;
    let env = Env::new(run.gpc.env);
    let mut curves = csv::Writer::from_path(out.join(CURVES_FILE))?;
    curves.write_record([
        "iteration",
        "mean_cost",
        "fit_loss",
        "policy_best_fraction",
        "wall_time",
        "records",
        "rollouts",
    ])?;
    let mut csv_err = None;
    let (model, stats) = train_with(&run.gpc, &env, |s| {
        let row = [
            s.iteration.to_string(),
            s.mean_cost.to_string(),
            s.final_fit_loss().to_string(),
            s.policy_best_fraction.to_string(),
            s.wall_time.to_string(),
            s.records.to_string(),
            s.rollouts.to_string(),
        ];
        if let Err(e) = curves.write_record(&row).and_then(|_| curves.flush().map_err(Into::into)) {
            csv_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = csv_err {
        return Err(e.into());
    }
    curves.flush()?;
    let checkpoint = Checkpoint::new(&env, model, run.gpc.clone(), stats)?;
    let checkpoint_path = out.join(CHECKPOINT_FILE);
    checkpoint.save(&checkpoint_path)?;
    Ok(TrainOutput {
        checkpoint,
        checkpoint_path,
    })
}

/// Environment, configuration and model for a command that may or may not
/// be given a checkpoint.
pub struct Context {
    pub env: Env,
    pub config: GpcConfig,
    pub model: Option<FlowModel>,
}

impl Context {
    /// With a checkpoint its training config is used; an explicit run config
    /// must then name the same environment.
    pub fn resolve(run: Option<&RunConfig>, checkpoint: Option<&Checkpoint>, env: Option<EnvKind>) -> Result<Self, CliError> {
        match checkpoint {
            Some(ckpt) => {
                let ckpt_env = ckpt.env()?;
                for requested in [run.map(|r| r.gpc.env), env].into_iter().flatten() {
                    if requested != ckpt_env.kind() {
                        return Err(CliError::Runtime(format!(
                            "environment mismatch: checkpoint was trained on {} but {} was requested",
                            ckpt_env.kind(),
                            requested
                        )));
                    }
                }
                let mut config = ckpt.payload.config.clone();
                if let Some(r) = run {
                    config.eval_samples = r.gpc.eval_samples;
                    config.eval_episode_len = r.gpc.eval_episode_len;
                }
                Ok(Self {
                    env: ckpt_env,
                    config,
                    model: Some(ckpt.payload.model.clone()),
                })
            }
            None => {
                let config = match (run, env) {
                    (Some(r), Some(e)) if r.gpc.env != e => {
                        return Err(CliError::Config(format!(
                            "environment mismatch: config names {} but --env is {e}",
                            r.gpc.env
                        )))
                    }
                    (Some(r), _) => r.gpc.clone(),
                    (None, Some(e)) => GpcConfig::for_env(e),
                    (None, None) => GpcConfig::for_env(EnvKind::Pendulum),
                };
                Ok(Self {
                    env: Env::new(config.env),
                    config,
                    model: None,
                })
            }
        }
    }
}

pub fn check_alpha(alpha: f64) -> Result<(), CliError> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(CliError::Config(format!("--alpha must lie in [0, 1], got {alpha}")))
    }
}

/// Runs a seeded evaluation and writes one CSV row per episode.
pub fn eval(ctx: &Context, mode: EvalMode, episodes: usize, alpha: f64, seed: u64, out: &Path) -> Result<EvalReport, CliError> {
    check_alpha(alpha)?;
    if episodes == 0 {
        return Err(CliError::Config("--episodes must be at least 1".into()));
    }
    if mode.needs_model() && ctx.model.is_none() {
        return Err(CliError::Config(format!("mode {mode} needs --checkpoint")));
    }
    create_dir(out)?;
    let opts = EvalOptions::new(&ctx.config, mode, episodes, alpha, seed);
    let report = evaluate(&ctx.config, &ctx.env, ctx.model.as_ref(), &opts)?;
    write_eval_csv(&report, &out.join(EVAL_FILE))?;
    Ok(report)
}

pub fn write_eval_csv(report: &EvalReport, path: &Path) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["episode", "mode", "alpha", "cost_per_step", "success", "roughness"])?;
    for (i, e) in report.episodes.iter().enumerate() {
        w.write_record([
            i.to_string(),
            report.mode.name().to_string(),
            report.alpha.to_string(),
            e.cost_per_step.to_string(),
            u8::from(e.success).to_string(),
            e.roughness.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn summary(report: &EvalReport, env: EnvKind) -> String {
    format!(
        "env {env} mode {} alpha {} episodes {}: mean cost/step {:.6} std {:.6} success rate {:.3} roughness {:.6}",
        report.mode,
        report.alpha,
        report.episodes.len(),
        report.mean_cost,
        report.std_cost,
        report.success_rate,
        report.roughness
    )
}

/// Header of `trajectory.csv` for `env`.
pub fn trajectory_header(env: &Env) -> Vec<String> {
    let s = &env.spec;
    let mut h = vec!["step".to_string(), "t".to_string()];
    h.extend((0..s.dof).map(|i| format!("q{i}")));
    h.extend((0..s.dof).map(|i| format!("v{i}")));
    h.extend((0..s.obs_dim).map(|i| format!("obs{i}")));
    h.extend((0..s.action_dim).map(|i| format!("u{i}")));
    h.push("running_cost".to_string());
    h
}

/// Writes one episode: the state each action was applied in, its
/// observation, the physical action and the running cost.
pub fn rollout(ctx: &Context, mode: EvalMode, alpha: f64, seed: u64, out: &Path) -> Result<PathBuf, CliError> {
    check_alpha(alpha)?;
    if mode.needs_model() && ctx.model.is_none() {
        return Err(CliError::Config(format!("mode {mode} needs --checkpoint")));
    }
    create_dir(out)?;
    let env = &ctx.env;
    let mut opts = EvalOptions::new(&ctx.config, mode, 1, alpha, seed);
    opts.episode_len = env.spec.episode_len;
    let trace = run_episode(&ctx.config, env, ctx.model.as_ref(), &opts, 0)?;
    let path = out.join(TRAJECTORY_FILE);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(trajectory_header(env))?;
    let dt = env.spec.control_dt();
    for (k, (action, cost)) in trace.actions.iter().zip(&trace.running_costs).enumerate() {
        let x = &trace.states[k];
        let mut row = vec![k.to_string(), (k as f64 * dt).to_string()];
        row.extend(x.q[..env.spec.dof].iter().map(|v| v.to_string()));
        row.extend(x.v[..env.spec.dof].iter().map(|v| v.to_string()));
        row.extend(env.observe(x).iter().map(|v| v.to_string()));
        let u = env.denormalize(action);
        row.extend(u[..env.spec.action_dim].iter().map(|v| v.to_string()));
        row.push(cost.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(path)
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub mode: EvalMode,
    pub threads: usize,
    pub steps: usize,
    pub mean_ms: f64,
    pub p95_ms: f64,
    pub rollouts_per_s: f64,
}

/// Times `steps` planning calls per mode along closed-loop episodes.
pub fn bench(ctx: &Context, steps: usize, seed: u64, out: &Path) -> Result<Vec<BenchRow>, CliError> {
    if steps == 0 {
        return Err(CliError::Config("--steps must be at least 1".into()));
    }
    create_dir(out)?;
    let env = &ctx.env;
    let model = match &ctx.model {
        Some(m) => m.clone(),
        None => init_model(&ctx.config, env)?,
    };
    let episode_steps = env.spec.episode_steps().max(1);
    let mut rows = Vec::new();
    for mode in EvalMode::ALL {
        let opts = EvalOptions::new(&ctx.config, mode, 1, 1.0, seed);
        let mut latencies = Vec::with_capacity(steps);
        let mut rollouts = 0usize;
        let mut episode = 0u64;
        while latencies.len() < steps {
            let key = StreamKey::new(seed).purpose(Purpose::Eval).child(episode);
            let mut planner = Planner::new(&ctx.config, env, Some(&model), &opts, key)?;
            let mut state = env.sample_initial_state(&mut key.purpose(Purpose::InitialState).rng());
            for _ in 0..episode_steps.min(steps - latencies.len()) {
                let start = Instant::now();
                let out = planner.plan(&state)?;
                latencies.push(start.elapsed().as_secs_f64());
                rollouts += out.rollouts;
                let u = env.denormalize(out.plan.first_action());
                match env.step(&env.nominal, &state, &u[..env.spec.action_dim]) {
                    Ok(s) => state = s,
                    Err(_) => break,
                }
            }
            episode += 1;
        }
        let total: f64 = latencies.iter().sum();
        let mut sorted = latencies.clone();
        sorted.sort_by(f64::total_cmp);
        let p95 = sorted[((0.95 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1];
        rows.push(BenchRow {
            mode,
            threads: rayon::current_num_threads(),
            steps: latencies.len(),
            mean_ms: 1e3 * total / latencies.len() as f64,
            p95_ms: 1e3 * p95,
            rollouts_per_s: if total > 0.0 { rollouts as f64 / total } else { 0.0 },
        });
    }
    let mut w = csv::Writer::from_path(out.join(BENCH_FILE))?;
    w.write_record(["mode", "threads", "steps", "mean_ms", "p95_ms", "rollouts_per_s"])?;
    for r in &rows {
        w.write_record([
            r.mode.name().to_string(),
            r.threads.to_string(),
            r.steps.to_string(),
            r.mean_ms.to_string(),
            r.p95_ms.to_string(),
            r.rollouts_per_s.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(rows)
}
