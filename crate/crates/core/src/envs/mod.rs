//! Analytically simulated control tasks.
//!
//! Each task supplies continuous-time accelerations, quadratic running and
//! terminal costs, an observation map and an initial-state sampler. Shared
//! code here handles actuator clamping, integration (classic RK4 at the
//! physics timestep, several substeps per control period) and rollouts of
//! zero-order-hold action sequences.

pub mod cartpole;
pub mod double_cartpole;
pub mod nav2d;
pub mod pendulum;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::spc::ActionSequence;
use crate::{Error, Result};

pub use cartpole::CartPoleParams;
pub use double_cartpole::DoubleCartPoleParams;
pub use nav2d::Nav2dParams;
pub use pendulum::PendulumParams;

/// Largest number of generalized coordinates of any task.
pub const MAX_DOF: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Pendulum,
    #[serde(rename = "cartpole")]
    CartPole,
    DoubleCartpole,
    Nav2d,
}

impl EnvKind {
    pub const ALL: [EnvKind; 4] = [
        EnvKind::Pendulum,
        EnvKind::CartPole,
        EnvKind::DoubleCartpole,
        EnvKind::Nav2d,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Pendulum => "pendulum",
            EnvKind::CartPole => "cartpole",
            EnvKind::DoubleCartpole => "double_cartpole",
            EnvKind::Nav2d => "nav2d",
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown environment '{s}' (expected pendulum, cartpole, double_cartpole or nav2d)"
                ))
            })
    }
}

/// Static description of a task: sizes, limits and timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub kind: EnvKind,
    pub dof: usize,
    pub action_dim: usize,
    pub obs_dim: usize,
    /// Symmetric bound per actuator, in physical units.
    pub action_limits: Vec<f64>,
    pub physics_dt: f64,
    pub control_hz: f64,
    /// Planning horizon in seconds.
    pub horizon: f64,
    pub num_knots: usize,
    /// Training episode length in seconds.
    pub episode_len: f64,
    pub initial_state: String,
}

impl EnvSpec {
    pub fn control_dt(&self) -> f64 {
        1.0 / self.control_hz
    }

    pub fn substeps(&self) -> usize {
        (self.control_dt() / self.physics_dt).round() as usize
    }

    pub fn horizon_steps(&self) -> usize {
        (self.horizon * self.control_hz).round() as usize
    }

    pub fn steps_for(&self, seconds: f64) -> usize {
        (seconds * self.control_hz).round() as usize
    }

    pub fn episode_steps(&self) -> usize {
        self.steps_for(self.episode_len)
    }

    pub fn validate(&self) -> Result<()> {
        let ratio = self.control_dt() / self.physics_dt;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return Err(Error::InvalidArgument(
                "control period must be an integer multiple of the physics timestep".into(),
            ));
        }
        if self.num_knots == 0 || self.horizon <= 0.0 {
            return Err(Error::InvalidArgument("horizon and knot count must be positive".into()));
        }
        Error::check_len("action limits", self.action_dim, self.action_limits.len())?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub q: [f64; MAX_DOF],
    pub v: [f64; MAX_DOF],
    pub step: usize,
}

impl EnvState {
    pub fn new(q: &[f64], v: &[f64]) -> Self {
        let mut s = Self {
            q: [0.0; MAX_DOF],
            v: [0.0; MAX_DOF],
            step: 0,
        };
        s.q[..q.len()].copy_from_slice(q);
        s.v[..v.len()].copy_from_slice(v);
        s
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.v).all(|x| x.is_finite())
    }
}

/// Physical parameters of one simulated domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainParams {
    Pendulum(PendulumParams),
    #[serde(rename = "cartpole")]
    CartPole(CartPoleParams),
    DoubleCartpole(DoubleCartPoleParams),
    Nav2d(Nav2dParams),
}

impl DomainParams {
    pub fn kind(&self) -> EnvKind {
        match self {
            DomainParams::Pendulum(_) => EnvKind::Pendulum,
            DomainParams::CartPole(_) => EnvKind::CartPole,
            DomainParams::DoubleCartpole(_) => EnvKind::DoubleCartpole,
            DomainParams::Nav2d(_) => EnvKind::Nav2d,
        }
    }

    /// Multiplies every randomizable parameter by an independent factor
    /// drawn from `U(1 - spread, 1 + spread)`.
    pub fn randomized<R: Rng + ?Sized>(&self, spread: f64, rng: &mut R) -> Self {
        let mut f = || {
            if spread > 0.0 {
                rng.random_range(1.0 - spread..=1.0 + spread)
            } else {
                1.0
            }
        };
        match *self {
            DomainParams::Pendulum(p) => DomainParams::Pendulum(PendulumParams {
                mass: p.mass * f(),
                length: p.length,
                damping: p.damping * f(),
                gain: p.gain * f(),
                gravity: p.gravity,
            }),
            DomainParams::CartPole(p) => DomainParams::CartPole(CartPoleParams {
                cart_mass: p.cart_mass * f(),
                pole_mass: p.pole_mass * f(),
                damping: p.damping * f(),
                gain: p.gain * f(),
                ..p
            }),
            DomainParams::DoubleCartpole(p) => DomainParams::DoubleCartpole(DoubleCartPoleParams {
                cart_mass: p.cart_mass * f(),
                mass1: p.mass1 * f(),
                mass2: p.mass2 * f(),
                damping: p.damping * f(),
                gain: p.gain * f(),
                ..p
            }),
            DomainParams::Nav2d(p) => DomainParams::Nav2d(Nav2dParams {
                mass: p.mass * f(),
                drag: p.drag * f(),
                gain: p.gain * f(),
            }),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            DomainParams::Pendulum(p) => p.mass > 0.0 && p.length > 0.0 && p.damping >= 0.0,
            DomainParams::CartPole(p) => {
                p.cart_mass > 0.0 && p.pole_mass > 0.0 && p.pole_length > 0.0 && p.damping >= 0.0
            }
            DomainParams::DoubleCartpole(p) => {
                p.cart_mass > 0.0
                    && p.mass1 > 0.0
                    && p.mass2 > 0.0
                    && p.length1 > 0.0
                    && p.length2 > 0.0
                    && p.damping >= 0.0
            }
            DomainParams::Nav2d(p) => p.mass > 0.0 && p.drag >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("non-physical domain parameters {self:?}")))
        }
    }
}

/// Wraps an angle into `[-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// A task together with its nominal physical parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Env {
    pub spec: EnvSpec,
    pub nominal: DomainParams,
}

impl Env {
    pub fn new(kind: EnvKind) -> Self {
        match kind {
            EnvKind::Pendulum => pendulum::env(),
            EnvKind::CartPole => cartpole::env(),
            EnvKind::DoubleCartpole => double_cartpole::env(),
            EnvKind::Nav2d => nav2d::env(),
        }
    }

    pub fn kind(&self) -> EnvKind {
        self.spec.kind
    }

    fn accel(&self, params: &DomainParams, q: &[f64; MAX_DOF], v: &[f64; MAX_DOF], u: &[f64]) -> [f64; MAX_DOF] {
        match params {
            DomainParams::Pendulum(p) => pendulum::accel(p, q, v, u),
            DomainParams::CartPole(p) => cartpole::accel(p, q, v, u),
            DomainParams::DoubleCartpole(p) => double_cartpole::accel(p, q, v, u),
            DomainParams::Nav2d(p) => nav2d::accel(p, q, v, u),
        }
    }

    /// Clamps a physical action to the actuator limits.
    pub fn clamp_action(&self, action: &[f64]) -> [f64; 2] {
        let mut u = [0.0; 2];
        for (i, (&a, &lim)) in action.iter().zip(&self.spec.action_limits).enumerate() {
            u[i] = a.clamp(-lim, lim);
        }
        u
    }

    /// Maps a normalized `[-1, 1]` action to physical units.
    pub fn denormalize(&self, normalized: &[f64]) -> [f64; 2] {
        let mut u = [0.0; 2];
        for (i, (&a, &lim)) in normalized.iter().zip(&self.spec.action_limits).enumerate() {
            u[i] = a.clamp(-1.0, 1.0) * lim;
        }
        u
    }

    /// Advances one control period with the action held constant.
    pub fn step(&self, params: &DomainParams, state: &EnvState, action: &[f64]) -> Result<EnvState> {
        Error::check_len("action", self.spec.action_dim, action.len())?;
        if params.kind() != self.kind() {
            return Err(Error::InvalidArgument(format!(
                "{} parameters passed to {}",
                params.kind(),
                self.kind()
            )));
        }
        let u = self.clamp_action(action);
        let u = &u[..self.spec.action_dim];
        let n = self.spec.dof;
        let h = self.spec.physics_dt;
        let (mut q, mut v) = (state.q, state.v);
        for _ in 0..self.spec.substeps() {
            let k1v = self.accel(params, &q, &v, u);
            let k1q = v;
            let (q2, v2) = (offset(&q, &k1q, 0.5 * h, n), offset(&v, &k1v, 0.5 * h, n));
            let k2v = self.accel(params, &q2, &v2, u);
            let k2q = v2;
            let (q3, v3) = (offset(&q, &k2q, 0.5 * h, n), offset(&v, &k2v, 0.5 * h, n));
            let k3v = self.accel(params, &q3, &v3, u);
            let k3q = v3;
            let (q4, v4) = (offset(&q, &k3q, h, n), offset(&v, &k3v, h, n));
            let k4v = self.accel(params, &q4, &v4, u);
            let k4q = v4;
            for i in 0..n {
                q[i] += h / 6.0 * (k1q[i] + 2.0 * k2q[i] + 2.0 * k3q[i] + k4q[i]);
                v[i] += h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
            }
        }
        let next = EnvState {
            q,
            v,
            step: state.step + 1,
        };
        if next.is_finite() {
            Ok(next)
        } else {
            Err(Error::Diverged { step: next.step })
        }
    }

    /// Running cost for a physical action (clamped to the limits first).
    pub fn running_cost(&self, state: &EnvState, action: &[f64]) -> f64 {
        let u = self.clamp_action(action);
        let u = &u[..self.spec.action_dim];
        match self.kind() {
            EnvKind::Pendulum => pendulum::running_cost(state, u),
            EnvKind::CartPole => cartpole::running_cost(state, u),
            EnvKind::DoubleCartpole => double_cartpole::running_cost(state, u),
            EnvKind::Nav2d => nav2d::running_cost(state, u),
        }
    }

    pub fn terminal_cost(&self, state: &EnvState) -> f64 {
        match self.kind() {
            EnvKind::Pendulum => pendulum::terminal_cost(state),
            EnvKind::CartPole => cartpole::terminal_cost(state),
            EnvKind::DoubleCartpole => double_cartpole::terminal_cost(state),
            EnvKind::Nav2d => nav2d::terminal_cost(state),
        }
    }

    pub fn observe(&self, state: &EnvState) -> Vec<f64> {
        match self.kind() {
            EnvKind::Pendulum => pendulum::observe(state),
            EnvKind::CartPole => cartpole::observe(state),
            EnvKind::DoubleCartpole => double_cartpole::observe(state),
            EnvKind::Nav2d => nav2d::observe(state),
        }
    }

    pub fn sample_initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> EnvState {
        match self.kind() {
            EnvKind::Pendulum => pendulum::sample_initial(rng),
            EnvKind::CartPole => cartpole::sample_initial(rng),
            EnvKind::DoubleCartpole => double_cartpole::sample_initial(rng),
            EnvKind::Nav2d => nav2d::sample_initial(rng),
        }
    }

    /// Whether the task configuration is reached in this single state.
    pub fn at_goal(&self, state: &EnvState) -> bool {
        match self.kind() {
            EnvKind::Pendulum => wrap_angle(state.q[0]).abs() < 0.2,
            EnvKind::CartPole => wrap_angle(state.q[1]).abs() < 0.2,
            EnvKind::DoubleCartpole => {
                wrap_angle(state.q[1]).abs() < 0.2 && wrap_angle(state.q[2]).abs() < 0.2
            }
            EnvKind::Nav2d => nav2d::distance_to_goal(state) < 0.1,
        }
    }

    /// Task success for a closed-loop trajectory `x_0 .. x_K`: pole(s) within
    /// 0.2 rad of upright over the final second, or for navigation within
    /// 0.1 m of the goal at the end.
    pub fn is_success(&self, trajectory: &[EnvState]) -> bool {
        let Some(last) = trajectory.last() else {
            return false;
        };
        match self.kind() {
            EnvKind::Nav2d => self.at_goal(last),
            _ => {
                let window = self.spec.steps_for(1.0).min(trajectory.len());
                trajectory[trajectory.len() - window..]
                    .iter()
                    .all(|s| self.at_goal(s))
            }
        }
    }

    /// Zero-order-hold rollout cost `phi(x_H) + sum l(x_t, u_t)`.
    ///
    /// Divergence is reported as `+inf` so the sample simply drops out of
    /// the weighting.
    pub fn rollout_cost(&self, params: &DomainParams, start: &EnvState, actions: &ActionSequence) -> f64 {
        let mut x = *start;
        let mut total = 0.0;
        for t in 0..actions.horizon_steps() {
            let u = self.denormalize(actions.action_at(t));
            let u = &u[..self.spec.action_dim];
            total += self.running_cost(&x, u);
            match self.step(params, &x, u) {
                Ok(next) => x = next,
                Err(e) => {
                    log::warn!("rollout diverged ({e}); treating cost as +inf");
                    return f64::INFINITY;
                }
            }
        }
        total + self.terminal_cost(&x)
    }

    pub fn check_params(&self, params: &DomainParams) -> Result<()> {
        if params.kind() != self.kind() {
            return Err(Error::InvalidArgument(format!(
                "{} parameters passed to {}",
                params.kind(),
                self.kind()
            )));
        }
        params.validate()
    }
}

#[inline]
fn offset(base: &[f64; MAX_DOF], dir: &[f64; MAX_DOF], h: f64, n: usize) -> [f64; MAX_DOF] {
    let mut out = *base;
    for i in 0..n {
        out[i] += h * dir[i];
    }
    out
}
