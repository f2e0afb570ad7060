//! Generative predictive control on small analytically simulated systems.
//!
//! The crate is organised bottom-up:
//!
//! - [`net`]: a fixed-topology MLP with reverse-mode gradients and Adam.
//! - [`envs`]: pendulum, cart-pole, double cart-pole and a 2D navigation task.
//! - [`spc`]: sampling-based predictive control (proposals, weighting,
//!   risk-aware domain aggregation, the mean update and the score estimator).
//! - [`flow`]: a conditional flow-matching policy over action sequences.
//! - [`gpc`]: the iterated collect/fit training loop and the SPC/GPC/GPC+
//!   evaluation harness.
//!
//! Parallel loops go through [`par`], which uses rayon when the `parallel`
//! feature is enabled and plain iterators otherwise. All randomness is
//! derived from counter-based substreams ([`rng::StreamKey`]) so results do
//! not depend on the number of worker threads.

pub mod envs;
pub mod error;
pub mod flow;
pub mod gpc;
pub mod net;
pub mod par;
pub mod rng;
pub mod spc;

pub use error::{Error, Result};
