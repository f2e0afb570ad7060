use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gpc_cli::checkpoint::Checkpoint;
use gpc_cli::commands::{self, Context};
use gpc_cli::config::RunConfig;
use gpc_cli::CliError;
use gpc_core::envs::EnvKind;
use gpc_core::gpc::EvalMode;

#[derive(Parser)]
#[command(name = "gpc", version, about = "Train, evaluate and benchmark generative predictive control policies")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (flat TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Environment when neither config nor checkpoint names one.
    #[arg(long)]
    env: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy and write checkpoint.json and training_curves.csv.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate SPC, GPC or GPC+ over seeded episodes.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// spc, gpc or gpc+.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        episodes: Option<usize>,
        /// Warm-start level in [0, 1].
        #[arg(long, allow_negative_numbers = true)]
        alpha: Option<f64>,
    },
    /// Write one closed-loop episode to trajectory.csv.
    Rollout {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        mode: Option<String>,
        #[arg(long, allow_negative_numbers = true)]
        alpha: Option<f64>,
    },
    /// Measure per-step planning latency of every mode.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Planning calls timed per mode.
        #[arg(long, default_value_t = 1000)]
        steps: usize,
    },
}

fn parse_env(name: &Option<String>) -> Result<Option<EnvKind>, CliError> {
    name.as_deref()
        .map(|n| n.parse().map_err(|e: gpc_core::Error| CliError::Config(e.to_string())))
        .transpose()
}

fn parse_mode(name: &Option<String>, default: EvalMode) -> Result<EvalMode, CliError> {
    match name {
        Some(n) => n.parse().map_err(|e: gpc_core::Error| CliError::Config(e.to_string())),
        None => Ok(default),
    }
}

fn load_run(common: &Common) -> Result<Option<RunConfig>, CliError> {
    let mut run = match &common.config {
        Some(p) => Some(RunConfig::load(p)?),
        None => None,
    };
    if let (Some(r), Some(seed)) = (&mut run, common.seed) {
        r.gpc.seed = seed;
    }
    Ok(run)
}

fn context(common: &Common, checkpoint: &Option<PathBuf>) -> Result<(Option<RunConfig>, Context), CliError> {
    let run = load_run(common)?;
    let ckpt = checkpoint.as_deref().map(Checkpoint::load).transpose()?;
    let ctx = Context::resolve(run.as_ref(), ckpt.as_ref(), parse_env(&common.env)?)?;
    Ok((run, ctx))
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("cannot start thread pool: {e}")))?;
    }
    match cli.command {
        Command::Train { common } => {
            let mut run = match load_run(&common)? {
                Some(r) => r,
                None => RunConfig::defaults(parse_env(&common.env)?.unwrap_or(EnvKind::Pendulum)),
            };
            if let Some(seed) = common.seed {
                run.gpc.seed = seed;
            }
            if let Some(e) = parse_env(&common.env)? {
                if e != run.gpc.env {
                    return Err(CliError::Config(format!(
                        "environment mismatch: config names {} but --env is {e}",
                        run.gpc.env
                    )));
                }
            }
            let out = commands::train(&run, &common.out)?;
            let last = out.checkpoint.payload.stats.last();
            println!(
                "trained {} for {} iterations; final cost/step {:.6}; checkpoint {} (sha256 {})",
                run.gpc.env,
                out.checkpoint.payload.stats.len(),
                last.map_or(f64::NAN, |s| s.mean_cost),
                out.checkpoint_path.display(),
                out.checkpoint.content_hash
            );
        }
        Command::Eval {
            common,
            checkpoint,
            mode,
            episodes,
            alpha,
        } => {
            let (run, ctx) = context(&common, &checkpoint)?;
            let default_mode = if ctx.model.is_some() { EvalMode::Gpc } else { EvalMode::Spc };
            let mode = parse_mode(&mode, run.as_ref().map_or(default_mode, |r| r.eval_mode))?;
            let episodes = episodes.unwrap_or(run.as_ref().map_or(100, |r| r.eval_episodes));
            let alpha = alpha.unwrap_or(run.as_ref().map_or(1.0, |r| r.eval_alpha));
            let seed = common.seed.unwrap_or(ctx.config.seed);
            let report = commands::eval(&ctx, mode, episodes, alpha, seed, &common.out)?;
            println!("{}", commands::summary(&report, ctx.env.kind()));
        }
        Command::Rollout {
            common,
            checkpoint,
            mode,
            alpha,
        } => {
            let (_, ctx) = context(&common, &checkpoint)?;
            let default_mode = if ctx.model.is_some() { EvalMode::Gpc } else { EvalMode::Spc };
            let mode = parse_mode(&mode, default_mode)?;
            let seed = common.seed.unwrap_or(ctx.config.seed);
            let path = commands::rollout(&ctx, mode, alpha.unwrap_or(1.0), seed, &common.out)?;
            println!("wrote {}", path.display());
        }
        Command::Bench {
            common,
            checkpoint,
            steps,
        } => {
            let (_, ctx) = context(&common, &checkpoint)?;
            let seed = common.seed.unwrap_or(ctx.config.seed);
            let rows = commands::bench(&ctx, steps, seed, &common.out)?;
            println!("{:<6} {:>7} {:>7} {:>10} {:>10} {:>14}", "mode", "threads", "steps", "mean_ms", "p95_ms", "rollouts/s");
            for r in rows {
                println!(
                    "{:<6} {:>7} {:>7} {:>10.3} {:>10.3} {:>14.0}",
                    r.mode.name(),
                    r.threads,
                    r.steps,
                    r.mean_ms,
                    r.p95_ms,
                    r.rollouts_per_s
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::try_parse().map_err(|e| (e.use_stderr(), e)) {
        Ok(cli) => match run(cli) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
        Err((true, e)) => {
            let _ = e.print();
            ExitCode::from(2)
        }
        Err((false, e)) => {
            let _ = e.print();
            ExitCode::SUCCESS
        }
    }
}
