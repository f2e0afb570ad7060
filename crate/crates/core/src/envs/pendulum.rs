//! Torque-limited pendulum swing-up; `theta = 0` is upright.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{wrap_angle, DomainParams, Env, EnvKind, EnvSpec, EnvState, MAX_DOF};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendulumParams {
    pub mass: f64,
    pub length: f64,
    pub damping: f64,
    pub gain: f64,
    pub gravity: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            length: 1.0,
            damping: 0.1,
            gain: 1.0,
            gravity: 9.81,
        }
    }
}

pub fn env() -> Env {
    Env {
        spec: EnvSpec {
            kind: EnvKind::Pendulum,
            dof: 1,
            action_dim: 1,
            obs_dim: 3,
            action_limits: vec![2.0],
            physics_dt: 0.01,
            control_hz: 50.0,
            horizon: 0.5,
            num_knots: 5,
            episode_len: 4.0,
            initial_state: "theta ~ U(-pi, pi), theta_dot ~ U(-1, 1)".into(),
        },
        nominal: DomainParams::Pendulum(PendulumParams::default()),
    }
}

pub(super) fn accel(p: &PendulumParams, q: &[f64; MAX_DOF], v: &[f64; MAX_DOF], u: &[f64]) -> [f64; MAX_DOF] {
    let inertia = p.mass * p.length * p.length;
    let torque = p.mass * p.gravity * p.length * q[0].sin() + p.gain * u[0] - p.damping * v[0];
    [torque / inertia, 0.0, 0.0]
}

pub(super) fn running_cost(s: &EnvState, u: &[f64]) -> f64 {
    let e = wrap_angle(s.q[0]);
    e * e + 0.1 * s.v[0] * s.v[0] + 0.001 * u[0] * u[0]
}

pub(super) fn terminal_cost(s: &EnvState) -> f64 {
    let e = wrap_angle(s.q[0]);
    10.0 * (e * e + 0.1 * s.v[0] * s.v[0])
}

pub(super) fn observe(s: &EnvState) -> Vec<f64> {
    vec![s.q[0].sin(), s.q[0].cos(), s.v[0]]
}

pub(super) fn sample_initial<R: Rng + ?Sized>(rng: &mut R) -> EnvState {
    EnvState::new(&[rng.random_range(-PI..=PI)], &[rng.random_range(-1.0..=1.0)])
}

/// Total mechanical energy with the potential measured from the hanging rest
/// position, so it is non-negative.
pub fn energy(p: &PendulumParams, s: &EnvState) -> f64 {
    let ml = p.mass * p.length;
    0.5 * ml * p.length * s.v[0] * s.v[0] + ml * p.gravity * (1.0 + s.q[0].cos())
}
