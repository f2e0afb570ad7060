//! Cart-pole with a point-mass pole; `theta = 0` is upright.
//!
//! Coordinates are `q = [x, theta]`, the action is a horizontal force.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{wrap_angle, DomainParams, Env, EnvKind, EnvSpec, EnvState, MAX_DOF};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartPoleParams {
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub pole_length: f64,
    /// Viscous damping on the pole joint.
    pub damping: f64,
    pub gain: f64,
    pub gravity: f64,
}

impl Default for CartPoleParams {
    fn default() -> Self {
        Self {
            cart_mass: 1.0,
            pole_mass: 0.1,
            pole_length: 1.0,
            damping: 0.0,
            gain: 1.0,
            gravity: 9.81,
        }
    }
}

pub fn env() -> Env {
    Env {
        spec: EnvSpec {
            kind: EnvKind::CartPole,
            dof: 2,
            action_dim: 1,
            obs_dim: 5,
            action_limits: vec![10.0],
            physics_dt: 0.01,
            control_hz: 50.0,
            horizon: 1.0,
            num_knots: 10,
            episode_len: 2.0,
            initial_state: "x ~ N(0, 0.05^2), theta ~ pi + N(0, 0.1^2), velocities ~ N(0, 0.05^2)".into(),
        },
        nominal: DomainParams::CartPole(CartPoleParams::default()),
    }
}

pub(super) fn accel(p: &CartPoleParams, q: &[f64; MAX_DOF], v: &[f64; MAX_DOF], u: &[f64]) -> [f64; MAX_DOF] {
    let (s, c) = q[1].sin_cos();
    let (mc, mp, l, g) = (p.cart_mass, p.pole_mass, p.pole_length, p.gravity);
    // [mc+mp, mp l c; mp l c, mp l^2] [xdd; thdd] = [f + mp l s thd^2; mp g l s - b thd]
    let r0 = p.gain * u[0] + mp * l * s * v[1] * v[1];
    let r1 = mp * g * l * s - p.damping * v[1];
    let (a, b, d) = (mc + mp, mp * l * c, mp * l * l);
    let det = a * d - b * b;
    [(d * r0 - b * r1) / det, (a * r1 - b * r0) / det, 0.0]
}

pub(super) fn running_cost(s: &EnvState, u: &[f64]) -> f64 {
    let e = wrap_angle(s.q[1]);
    e * e + 0.1 * s.q[0] * s.q[0] + 0.1 * (s.v[0] * s.v[0] + s.v[1] * s.v[1]) + 0.001 * u[0] * u[0]
}

pub(super) fn terminal_cost(s: &EnvState) -> f64 {
    let e = wrap_angle(s.q[1]);
    10.0 * (e * e + 0.1 * s.q[0] * s.q[0] + 0.1 * (s.v[0] * s.v[0] + s.v[1] * s.v[1]))
}

pub(super) fn observe(s: &EnvState) -> Vec<f64> {
    vec![s.q[1].sin(), s.q[1].cos(), s.q[0], s.v[0], s.v[1]]
}

pub(super) fn sample_initial<R: Rng + ?Sized>(rng: &mut R) -> EnvState {
    let small = Normal::new(0.0, 0.05).expect("valid std");
    let angle = Normal::new(PI, 0.1).expect("valid std");
    EnvState::new(
        &[small.sample(rng), angle.sample(rng)],
        &[small.sample(rng), small.sample(rng)],
    )
}

pub fn energy(p: &CartPoleParams, s: &EnvState) -> f64 {
    let (mc, mp, l, g) = (p.cart_mass, p.pole_mass, p.pole_length, p.gravity);
    let (sn, c) = s.q[1].sin_cos();
    let (xd, td) = (s.v[0], s.v[1]);
    let px = xd + l * c * td;
    let py = -l * sn * td;
    0.5 * mc * xd * xd + 0.5 * mp * (px * px + py * py) + mp * g * l * (1.0 + c)
}
