//! Iterated SPC data collection and flow fitting, plus closed-loop
//! evaluation of SPC, the policy alone (GPC) and SPC with policy samples
//! (GPC+).

mod collect;
mod config;
mod eval;
mod train;

pub use collect::{collect_iteration, collect_with, CollectStats};
pub use config::GpcConfig;
pub use eval::{evaluate, roughness, run_episode, EpisodeResult, EpisodeTrace, EvalMode, EvalOptions, EvalReport, PlanStep, Planner};
pub use train::{init_model, train, train_with, IterationStats};
